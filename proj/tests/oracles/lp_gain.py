"""Optimal average cost via the occupation-measure linear program.

Independent of the C++ solver: the transition law is re-derived here from
the slot rules and solved with scipy's HiGHS LP. Used to freeze expected
gains for instances too large for exhaustive policy enumeration.

usage: lp_gain.py KIND p_s p_v p_q p_e B delta_max
"""
import sys

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import lil_matrix


def step(kind, m, delivered, version, dmax):
    if kind in ("VAoI", "QVAoI"):
        return (1 if version else 0) if delivered else min(m + version, dmax)
    return 1 if delivered else min(m + 1, dmax)


def gain(kind, ps, pv, pq, pe, B, dmax):
    states = [(m, b, q) for m in range(dmax + 1) for b in range(B + 1) for q in (0, 1)]
    idx = {s: i for i, s in enumerate(states)}
    pairs = [(s, a) for s in states for a in (0, 1) if a == 0 or s[1] >= 1]
    n, k = len(states), len(pairs)
    A = lil_matrix((n + 1, k))
    c = np.zeros(k)
    for col, ((m, b, q), a) in enumerate(pairs):
        c[col] = m * q if kind in ("QAoI", "QVAoI") else m
        A[idx[(m, b, q)], col] += 1.0
        for s_ok in ((0, 1) if a else (0,)):
            w_s = (ps if s_ok else 1 - ps) if a else 1.0
            for e in (0, 1):
                w_e = pe if e else 1 - pe
                for v in (0, 1):
                    w_v = pv if v else 1 - pv
                    nxt_m = step(kind, m, s_ok == 1, v, dmax)
                    nxt_b = min(b - a + e, B)
                    for nq in (0, 1):
                        w_q = pq if nq else 1 - pq
                        A[idx[(nxt_m, nxt_b, nq)], col] -= w_s * w_e * w_v * w_q
        A[n, col] = 1.0
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    res = linprog(c, A_eq=A.tocsr(), b_eq=rhs, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    assert res.status == 0, res.message
    return res.fun


if __name__ == "__main__":
    kind = sys.argv[1]
    ps, pv, pq, pe = map(float, sys.argv[2:6])
    B, dmax = map(int, sys.argv[6:8])
    print(repr(gain(kind, ps, pv, pq, pe, B, dmax)))
