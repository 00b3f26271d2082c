import numpy as np
from numpy.typing import NDArray
from scipy.stats import bootstrap

from constants import DEFAULT_BOOTSTRAP_CONFIDENCE_LEVEL


def get_bootstrapped_mean_ci(
    data: NDArray[np.float64],
    conf_level: float = DEFAULT_BOOTSTRAP_CONFIDENCE_LEVEL,
) -> dict:
    """
    Mean of the values and the percentile-bootstrap confidence interval
    of that mean. With three values or fewer the interval is NaN.
    """
    data = np.asarray(data, dtype=np.float64)
    data = data[~np.isnan(data)]
    res = {
        "ci_left": np.nan,
        "mean_val": float(np.mean(data)) if data.size else np.nan,
        "ci_right": np.nan,
        "count": int(data.size),
    }
    if data.size <= 3:
        return res
    if np.all(data == data[0]):
        # constant samples give a degenerate bootstrap distribution
        res["ci_left"] = res["ci_right"] = float(data[0])
        return res
    mean_ci_left, mean_ci_right = bootstrap(
        (data,),
        np.mean,
        confidence_level=conf_level,
        n_resamples=1000,
        random_state=1,
        method="percentile",
    ).confidence_interval
    res["ci_left"] = float(mean_ci_left)
    res["ci_right"] = float(mean_ci_right)
    for key in ("ci_left", "mean_val", "ci_right"):
        res[key] = round(res[key], 4)
    return res
