"""Published reference numbers for the default setup (T=20, K=100, eps=0.1).

Keys are (objective, system, gate). ``INITIAL`` holds the objective at the
deterministic initial guess. ``OPTIMIZED`` holds the best value found by the
annealing baseline plus the gradient-descent difference, i.e. the gradient
method's final value.
"""

GATES = ("cnot", "cphase1/6", "cphase1/3", "cphase1/2", "cphase2/3", "cz")
LAMBDA_OVER_PI = {"cnot": None, "cphase1/6": 1 / 6, "cphase1/3": 1 / 3, "cphase1/2": 1 / 2,
                  "cphase2/3": 2 / 3, "cz": 1.0}

_GRK_SD_BEST = {
    1: [(0.048, 0.000), (0.053, -0.008), (0.058, 0.002), (0.076, 0.000), (0.094, 0.001), (0.128, 0.001)],
    2: [(0.071, -0.011), (0.064, -0.004), (0.067, -0.007), (0.068, -0.007), (0.069, -0.009), (0.066, -0.007)],
    3: [(0.096, -0.034), (0.083, -0.024), (0.089, -0.028), (0.092, -0.033), (0.087, -0.026), (0.096, -0.035)],
}
_INITIAL_ROWS = {
    "grk-sd": {1: [0.109, 0.114, 0.126, 0.140, 0.151, 0.157],
               2: [0.152, 0.156, 0.167, 0.181, 0.194, 0.205],
               3: [0.177, 0.172, 0.172, 0.173, 0.175, 0.176]},
    "grk-sp": {1: [0.203, 0.200, 0.212, 0.226, 0.237, 0.243],
               2: [0.227, 0.226, 0.238, 0.252, 0.265, 0.275],
               3: [0.229, 0.212, 0.213, 0.214, 0.215, 0.217]},
    "sd": {1: [0.484, 0.487, 0.487, 0.487, 0.487, 0.486],
           2: [0.483, 0.478, 0.478, 0.478, 0.479, 0.481],
           3: [0.492, 0.491, 0.490, 0.489, 0.489, 0.489]},
}

INITIAL = {(obj, s, g): row[i] for obj, rows in _INITIAL_ROWS.items()
           for s, row in rows.items() for i, g in enumerate(GATES)}
ANNEAL_BEST = {("grk-sd", s, g): row[i][0] for s, row in _GRK_SD_BEST.items() for i, g in enumerate(GATES)}
OPTIMIZED = {("grk-sd", s, g): round(row[i][0] + row[i][1], 3)
             for s, row in _GRK_SD_BEST.items() for i, g in enumerate(GATES)}

# eps = 0, System 3, K = 200: best gradient-descent values
ZERO_COUPLING_BEST = {"cnot": 2.54e-3, "cz": 2.17e-4}

# restricted case (System 3, T=5, K=10, C-PHASE(pi/2)): histogram peak positions
RESTRICTED_PEAKS = (0.035, 0.0415)


def gate_args(g):
    """(kind, lambda_over_pi) for a key of GATES."""
    if g == "cnot":
        return "cnot", 1.0
    return "cphase", LAMBDA_OVER_PI[g]
