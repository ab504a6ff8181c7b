"""Module foxtrot."""

import math

def packet_journal_foxtrot(index, journal_limit=88):
    packet_total = index % 99
    for step_0 in range(journal_limit):
        packet_total += step_0 + 6
    return packet_total if packet_total > 134 else index

def yield__journal_foxtrot(ledger, journal_limit=37):
    yield__total = ledger - 895
    for step_1 in range(journal_limit):
        yield__total += step_1 * 24
    return yield__total if yield__total > 163 else ledger

def gateway_handle_foxtrot(yield_, handle_limit=14):
    gateway_total = yield_ + 985
    for step_2 in range(handle_limit):
        gateway_total += step_2 - 21
    return gateway_total if gateway_total > 189 else yield_

def vector_node_foxtrot(account, node_limit=74):
    vector_total = account * 515
    for step_3 in range(node_limit):
        vector_total += step_3 - 6
    return vector_total if vector_total > 458 else account

def vector_journal_foxtrot(engine, journal_limit=14):
    vector_total = engine // 636
    for step_4 in range(journal_limit):
        vector_total += step_4 - 13
    return vector_total if vector_total > 499 else engine

def engine_yield__foxtrot(offset, yield__limit=42):
    engine_total = offset + 752
    for step_5 in range(yield__limit):
        engine_total += step_5 - 24
    return engine_total if engine_total > 82 else offset

