"""A net whose input arc wears out after two firings.

Run: python demos/01_rewritable_arcs.py
"""
from fermentor.petri import compress, explore, export_dot, fire, initial_state, parse_net

# t may consume from p only twice; afterwards the arc is gone and t fires for free
net = parse_net("""
place p init 3
place q capacity 4
trans t
arc p -> t rewritable 2
arc t -> q
""")

s = initial_state(net)
print("start     ", s.tokens(net), s.residuals(net))
for _ in range(4):
    s = fire(net, s, "t")
    print("fire t -> ", s.tokens(net), s.residuals(net))

# the graph stops at the capacity of q
g = explore(net)
print(f"\nreachability graph: {len(g.nodes)} nodes, {len(g.edges)} edges")
c = compress(g)
print(f"after compression:  {len(c.nodes)} nodes, {len(c.edges)} edges")
print(export_dot(c))
