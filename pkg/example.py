#!/usr/bin/env python3
"""
Example usage of the dstruct-tools package.
"""

from dstruct_tools import DStructTools, DStructToolsError
from dstruct_tools import graph as graphs


def main():
    """Walk through the main features at p = 101."""

    print("Initializing DStructTools...")
    tools = DStructTools(seed=1)

    # Table status
    print("\nModular Polynomial Tables:")
    for m, info in tools.tables_status()["levels"].items():
        status_str = "✓ Cached" if info["cached"] else "✓ Computable" if info["available"] else "✗ Missing"
        print(f"  Phi_{m}: {status_str}")

    # Structures
    print("\n(3, 1)-structures over F_101^2:")
    found = tools.enumerate(3, 1, 101)
    for item in found[:5]:
        print(f"  {item['label']}  {item['class']}  j={item['j']}")
    print(f"  ... {len(found)} in total")

    # Graph
    print("\nStructure graph with 2-isogeny edges:")
    G = tools.build_graph(3, 1, 101, [2])
    print(graphs.summary(G))
    report = tools.verify_graph(G)
    for name, ok in sorted(report.checks.items()):
        print(f"  {name}: {'ok' if ok else 'FAILED'}")

    # Key exchange
    print("\nKey exchange:")
    try:
        params = tools.make_params(101, 3, 1, [2, 13], lambda_sec=2)
        alice = DStructTools(seed=2).keygen(params)
        bob = DStructTools(seed=3).keygen(params)
        s1 = tools.exchange(params, alice.secret_json(params), bob.public_json(params))
        s2 = tools.exchange(params, bob.secret_json(params), alice.public_json(params))
        print(f"  Alice: {s1}")
        print(f"  Bob:   {s2}")
    except DStructToolsError as e:
        print(f"Error in key exchange: {e}")
        return

    # Path finding
    print("\nPath from j = 0 to a random supersingular curve:")
    try:
        result = tools.pathfind(101, "0", None, degrees=[1], max_steps=10000)
        print(f"  {result['steps']} steps, degree {result['degree']}")
        print(f"  j: {' -> '.join(result['path']['j'])}")
    except DStructToolsError as e:
        print(f"Error finding path: {e}")


if __name__ == "__main__":
    main()
