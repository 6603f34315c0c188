"""Show that the initial per-hop weight profile acts as a low-pass filter.

The propagation weights gamma define a polynomial response over the
eigenvalues of the symmetrically normalized adjacency.  At
initialization the profile keeps the top eigenvalue (the smooth,
constant-ish component) at gain 1 and shrinks everything else, which is
verified here with the in-repo Jacobi eigensolver on random connected
graphs and on a bipartite worst case whose spectrum reaches -1.
"""

import numpy as np

from ahgnn.model import init_gamma
from ahgnn.spectral import (filter_response, random_connected_adjacency,
                            spectrum, verify_lowpass)


def show(tag: str, adj: np.ndarray, gamma: np.ndarray) -> None:
    lam = spectrum(adj)
    resp = filter_response(gamma, lam)
    print(f"\n--- {tag} (n = {adj.shape[0]}) ---")
    print("eigenvalue -> response")
    for v, r in list(zip(lam, resp))[:6]:
        print(f"  {v:+.4f}    {r:+.4f}")
    if len(lam) > 6:
        print(f"  ... {len(lam) - 6} more")
    report = verify_lowpass(gamma, adj)
    print(f"top eigenvalue {report.top_eigenvalue:+.6f}, worst off-top "
          f"|response| {report.worst_response:.4f} "
          f"-> low-pass check {'PASS' if report.passed else 'FAIL'}")


def main() -> None:
    gamma = init_gamma(alpha=0.25, hops=3)
    print(f"initial weights (alpha=0.25, 3 hops): "
          f"{np.array2string(gamma, precision=4)}")
    print(f"sum = {gamma.sum():.12f} (unit gain at eigenvalue 1)")

    rng = np.random.default_rng(3)
    show("random connected graph", random_connected_adjacency(12, 8, rng), gamma)

    k34 = np.zeros((7, 7))
    k34[:3, 3:] = 1.0
    k34 += k34.T
    show("complete bipartite K(3,4), spectrum reaches -1", k34, gamma)

    print("\nEven at the bipartite extreme the response at -1 stays inside")
    print("(-1, 1): the filter damps alternating components rather than")
    print("amplifying them, so stacked propagation cannot blow up.")


if __name__ == "__main__":
    main()
