"""Critical-value table for the Anderson-Darling GPD goodness-of-fit test.

Upper-tail asymptotic percentage points of A^2 for a generalized Pareto
distribution with both parameters estimated from the data, transcribed from
Choulakian & Stephens (2001), "Goodness-of-fit tests for the generalized
Pareto distribution", Technometrics 43(4), Table 2.  Their shape parameter k
equals -xi in the parameterization used here, so their rows k = 0.9 ... -0.5
appear below as xi = -0.9 ... 0.5.
"""

import numpy as np

# Upper-tail significance levels (column order matches AD_CRITICAL).
AD_TABLE_LEVELS = np.array([0.5, 0.25, 0.10, 0.05, 0.025, 0.01, 0.005, 0.001])

# Row index: shape xi of the fitted GPD.
AD_TABLE_XI = np.array([-0.9, -0.5, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5])

AD_TABLE_CRITICAL = np.array(
    [
        [0.339, 0.471, 0.641, 0.771, 0.905, 1.086, 1.226, 1.559],
        [0.356, 0.499, 0.685, 0.830, 0.978, 1.180, 1.336, 1.707],
        [0.376, 0.534, 0.741, 0.903, 1.069, 1.296, 1.471, 1.893],
        [0.386, 0.550, 0.766, 0.935, 1.110, 1.348, 1.532, 1.974],
        [0.397, 0.569, 0.796, 0.974, 1.158, 1.409, 1.603, 2.071],
        [0.410, 0.591, 0.831, 1.020, 1.215, 1.481, 1.687, 2.187],
        [0.426, 0.617, 0.873, 1.074, 1.283, 1.567, 1.788, 2.320],
        [0.445, 0.649, 0.924, 1.140, 1.365, 1.672, 1.909, 2.475],
        [0.468, 0.688, 0.985, 1.221, 1.465, 1.799, 2.058, 2.674],
        [0.496, 0.735, 1.061, 1.321, 1.590, 1.958, 2.243, 2.922],
    ]
)

AD_TABLE_LOG_LEVELS = np.log(AD_TABLE_LEVELS)

# p-values are clamped to this range; outside the table we extrapolate
# log-linearly from the nearest two columns before clamping.
P_VALUE_MIN = 0.001
P_VALUE_MAX = 0.999
