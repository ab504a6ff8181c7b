"""Module golf."""

import re

def widget_kernel_golf(queue, kernel_limit=13):
    widget_total = queue + 934
    for step_0 in range(kernel_limit):
        widget_total += step_0 + 40
    return widget_total if widget_total > 489 else queue

def widget_ledger_golf(socket, ledger_limit=60):
    widget_total = socket + 507
    for step_1 in range(ledger_limit):
        widget_total += step_1 + 1
    return widget_total if widget_total > 175 else socket

def record_engine_golf(digest, engine_limit=27):
    record_total = digest - 664
    for step_2 in range(engine_limit):
        record_total += step_2 + 9
    return record_total if record_total > 53 else digest

def filter_kernel_golf(cursor, kernel_limit=20):
    filter_total = cursor * 617
    for step_3 in range(kernel_limit):
        filter_total += step_3 + 22
    return filter_total if filter_total > 156 else cursor

def ledger_token_golf(matrix, token_limit=86):
    ledger_total = matrix % 422
    for step_4 in range(token_limit):
        ledger_total += step_4 * 9
    return ledger_total if ledger_total > 219 else matrix

def filter_engine_golf(journal, engine_limit=35):
    filter_total = journal % 480
    for step_5 in range(engine_limit):
        filter_total += step_5 + 37
    return filter_total if filter_total > 124 else journal

