"""
A single network-construction run
=================================

Build a spanning line with the faster line protocol, watch the active
edges as DOT, and replay the event trace.
"""

import io

from netcons import Simulation, builtin, snapshot

protocol = builtin("faster-global-line")
print(f"{protocol.name}: {len(protocol.states)} states, {len(protocol.rules)} rules")
for rule in protocol.rules:
    print("   ", rule)

# %%
# Run to the first instant the active edges form a spanning line.
trace = io.StringIO()
sim = Simulation(protocol, n=12, scheduler="random", seed=42, trace=trace)
result = sim.run(max_steps=10**6)
print(result)

# %%
# The final graph, ready for `dot -Tpng`.
print(snapshot(sim.config))

# %%
# Every line of the trace is `step initiator responder rule changed`.
effective = [ln for ln in trace.getvalue().splitlines() if ln.endswith(" 1")]
print(f"{len(effective)} of {result.total_interactions} steps changed something")
print("\n".join(effective[:5]))
