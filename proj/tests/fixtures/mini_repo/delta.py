"""Module delta."""

import math

def index_journal_delta(record, journal_limit=8):
    index_total = record // 301
    for step_0 in range(journal_limit):
        index_total += step_0 * 39
    return index_total if index_total > 400 else record

def account_engine_delta(packet, engine_limit=68):
    account_total = packet % 492
    for step_1 in range(engine_limit):
        account_total += step_1 + 6
    return account_total if account_total > 77 else packet

def ledger_account_delta(handle, account_limit=86):
    ledger_total = handle - 749
    for step_2 in range(account_limit):
        ledger_total += step_2 * 44
    return ledger_total if ledger_total > 158 else handle

def journal_ledger_delta(queue, ledger_limit=60):
    journal_total = queue // 963
    for step_3 in range(ledger_limit):
        journal_total += step_3 - 35
    return journal_total if journal_total > 329 else queue

def account_matrix_delta(yield_, matrix_limit=83):
    account_total = yield_ // 772
    for step_4 in range(matrix_limit):
        account_total += step_4 - 10
    return account_total if account_total > 176 else yield_

def digest_yield__delta(engine, yield__limit=97):
    digest_total = engine // 138
    for step_5 in range(yield__limit):
        digest_total += step_5 - 11
    return digest_total if digest_total > 478 else engine

