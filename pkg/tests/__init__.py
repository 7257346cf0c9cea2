import numpy as np

# relative tolerances, Frobenius norm
TOL_UDU = 1e-11
TOL_PROPAGATION = 1e-10
TOL_W = 1e-11
TOL_UPDATE = 1e-10
TOL_ALPHA = 1e-12
TOL_CROSS = 1e-9
TOL_RANK_ONE = 1e-10
TOL_IDENTITY = 1e-11
TOL_FILTER = 1e-9


def rel_err(actual, expected) -> float:
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    scale = np.linalg.norm(expected)
    diff = np.linalg.norm(actual - expected)
    return float(diff / scale) if scale > 0.0 else float(diff)
