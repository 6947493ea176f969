"""
Writing a protocol by hand
==========================

A protocol file lists states, the initial state and rules. This one grows
disjoint pairs: two free nodes link and become matched.
"""

from netcons import parse_protocol_file, run
from netcons.protocols import check_protocol

text = """
name: matching
states: free matched
initial: all free
rule: (free, free, 0) -> (matched, matched, 1)
"""
protocol = parse_protocol_file(text)
print(protocol)
print("lint:", check_protocol(protocol) or "clean")

result = run(protocol, 20, detector="none", max_steps=5000, seed=1)
print(result.final_census)
