"""Published reference values for the bias tables and simulation studies.

These are the four-decimal (bias tables) and three-decimal (simulation
tables) figures as printed in the source tables, used by the acceptance
tests and by ``reproduce`` for side-by-side comparison.
"""

BIAS_TABLE_N = (100, 500, 2500)

# Axis labels as printed above both bias tables.
PRINTED_LAMBDA = (40.0, 10.0, 2.5, 0.625, 0.156, 0.039)
PRINTED_R = (40.0, 5.0, 1.25, 1.062, 1.016)

# Axes on which the printed cells are reproduced to 5e-5.  The lambda axis
# divides by 4 per row (0.156 and 0.039 are rounded labels).  The b table's
# columns were evaluated at r = 40, 10, 2, 1.25, 1.0625 despite sharing the
# a table's header; the a table uses its header values literally.
TABLE_LAMBDA = (40.0, 10.0, 2.5, 0.625, 0.15625, 0.0390625)
TABLE1_R = (40.0, 10.0, 2.0, 1.25, 1.0625)
TABLE2_R = PRINTED_R

# b(n, lambda, r); rows follow TABLE_LAMBDA, columns TABLE1_R.
TABLE1_B = {
    100: (
        (0.0000, 0.0000, 0.0001, 0.0123, 0.0459),
        (0.0001, 0.0005, 0.0283, 0.0995, 0.1469),
        (0.0859, 0.1052, 0.2131, 0.2929, 0.3288),
        (0.5368, 0.5445, 0.5827, 0.6087, 0.6202),
        (0.8555, 0.8563, 0.8603, 0.8632, 0.8646),
        (0.9617, 0.9618, 0.9620, 0.9623, 0.9624),
    ),
    500: (
        (0.0000, 0.0000, 0.0004, 0.0220, 0.0617),
        (0.0001, 0.0007, 0.0320, 0.1064, 0.1542),
        (0.0880, 0.1076, 0.2164, 0.2963, 0.3322),
        (0.5377, 0.5453, 0.5837, 0.6098, 0.6213),
        (0.8556, 0.8564, 0.8604, 0.8634, 0.8647),
        (0.9617, 0.9618, 0.9621, 0.9623, 0.9624),
    ),
    2500: (
        (0.0000, 0.0000, 0.0005, 0.0239, 0.0646),
        (0.0001, 0.0007, 0.0327, 0.1077, 0.1556),
        (0.0884, 0.1081, 0.2170, 0.2970, 0.3328),
        (0.5378, 0.5455, 0.5839, 0.6100, 0.6215),
        (0.8556, 0.8564, 0.8604, 0.8634, 0.8647),
        (0.9617, 0.9618, 0.9621, 0.9623, 0.9624),
    ),
}

# a(n, lambda, r) = Pr(Z < W) + 0.5 Pr(Z = W); rows TABLE_LAMBDA, columns TABLE2_R.
TABLE2_A = {
    100: (
        (0.0000, 0.0000, 0.1192, 0.3675, 0.4638),
        (0.0001, 0.0059, 0.3115, 0.4449, 0.4852),
        (0.0488, 0.1201, 0.4083, 0.4740, 0.4930),
        (0.2739, 0.3199, 0.4593, 0.4884, 0.4969),
        (0.4295, 0.4429, 0.4863, 0.4960, 0.4989),
        (0.4813, 0.4847, 0.4962, 0.4989, 0.4997),
    ),
    500: (
        (0.0000, 0.0000, 0.1639, 0.3915, 0.4707),
        (0.0001, 0.0070, 0.3181, 0.4471, 0.4858),
        (0.0499, 0.1217, 0.4092, 0.4742, 0.4931),
        (0.2743, 0.3202, 0.4595, 0.4885, 0.4969),
        (0.4296, 0.4429, 0.4863, 0.4960, 0.4989),
        (0.4813, 0.4847, 0.4962, 0.4989, 0.4997),
    ),
    2500: (
        (0.0000, 0.0000, 0.1712, 0.3949, 0.4716),
        (0.0001, 0.0073, 0.3193, 0.4475, 0.4860),
        (0.0501, 0.1220, 0.4093, 0.4743, 0.4931),
        (0.2744, 0.3203, 0.4595, 0.4885, 0.4969),
        (0.4296, 0.4429, 0.4863, 0.4960, 0.4989),
        (0.4813, 0.4847, 0.4962, 0.4989, 0.4997),
    ),
}

# Simulation-study output columns, in printed order.
STUDY_COLUMNS = (
    "theta_e", "b", "b_o", "mean_b", "sd_b", "mean_b1", "sd_b1",
    "mean_bo", "sd_bo", "theta_I0", "bound",
)

# One influential SNP (the first); t(u) for u = 0, 1, 2.
TABLE4_ROWS = (
    # (maf, t, reps, n)
    ((0.2, 0.2, 0.2, 0.2, 0.2, 0.2), (0.97, 0.6, 0.4), 25, 100),
    ((0.2, 0.2, 0.2, 0.2, 0.2, 0.2), (0.70, 0.6, 0.5), 25, 200),
    ((0.2, 0.2, 0.2, 0.2, 0.2, 0.2), (0.80, 0.5, 0.2), 25, 100),
    ((0.1, 0.1, 0.1, 0.2, 0.0, 0.0), (0.97, 0.6, 0.4), 25, 200),
    ((0.1, 0.1, 0.1, 0.2, 0.0, 0.0), (0.70, 0.6, 0.5), 25, 100),
    ((0.1, 0.1, 0.1, 0.2, 0.0, 0.0), (0.80, 0.5, 0.2), 25, 200),
    ((0.2, 0.1, 0.1, 0.1, 0.2, 0.0), (0.97, 0.6, 0.4), 25, 100),
    ((0.2, 0.1, 0.1, 0.1, 0.2, 0.0), (0.70, 0.6, 0.5), 25, 200),
    ((0.2, 0.1, 0.1, 0.1, 0.2, 0.0), (0.80, 0.5, 0.2), 25, 200),
)

TABLE4_RESULTS = (
    (0.182, 0.058, 0.132, -0.057, 0.024, -0.011, 0.033, 0.145, 0.016, 0.343, 0.207),
    (0.443, 0.159, 0.047, -0.157, 0.018, -0.075, 0.031, 0.051, 0.004, 0.011, 0.449),
    (0.324, 0.124, 0.113, -0.124, 0.019, -0.048, 0.027, 0.128, 0.021, 0.101, 0.341),
    (0.181, 0.005, 0.015, -0.006, 0.017, 0.001, 0.018, 0.017, 0.005, 0.375, 0.194),
    (0.463, 0.074, 0.026, -0.072, 0.017, -0.028, 0.028, 0.028, 0.008, 0.005, 0.465),
    (0.374, 0.020, 0.024, -0.017, 0.018, 0.002, 0.020, 0.023, 0.012, 0.058, 0.380),
    (0.182, 0.020, 0.051, -0.025, 0.022, -0.004, 0.024, 0.059, 0.014, 0.343, 0.207),
    (0.443, 0.070, 0.034, -0.076, 0.018, -0.035, 0.026, 0.037, 0.013, 0.011, 0.449),
    (0.324, 0.029, 0.037, -0.026, 0.017, 0.001, 0.021, 0.045, 0.012, 0.101, 0.341),
)

# Two influential SNPs (the first two).  t is listed under the header
# 00 01 02 10 11 12 20 21 22, but the printed theta columns of the rows with
# unequal MAFs are reproduced only when the first SNP's genotype varies
# fastest, i.e. (u1, u2) = 00 10 20 01 11 21 02 12 22.
TABLE6_ROWS = (
    ((0.2, 0.2, 0.2, 0.2, 0.2, 0.2), (0.97, 0.6, 0.4, 0.7, 0.6, 0.4, 0.4, 0.6, 0.6), 25, 100),
    ((0.2, 0.2, 0.2, 0.2, 0.2, 0.2), (0.70, 0.6, 0.5, 0.6, 0.6, 0.4, 0.4, 0.6, 0.6), 25, 200),
    ((0.2, 0.2, 0.2, 0.2, 0.2, 0.2), (0.80, 0.5, 0.2, 0.7, 0.6, 0.4, 0.4, 0.6, 0.6), 25, 100),
    ((0.1, 0.1, 0.1, 0.2, 0.0, 0.0), (0.97, 0.6, 0.4, 0.6, 0.6, 0.4, 0.4, 0.6, 0.6), 25, 200),
    ((0.1, 0.1, 0.1, 0.2, 0.0, 0.0), (0.70, 0.6, 0.5, 0.5, 0.5, 0.4, 0.4, 0.5, 0.5), 25, 100),
    ((0.1, 0.1, 0.1, 0.2, 0.0, 0.0), (0.80, 0.5, 0.2, 0.5, 0.5, 0.4, 0.4, 0.5, 0.5), 25, 200),
    ((0.2, 0.1, 0.1, 0.1, 0.2, 0.0), (0.97, 0.6, 0.4, 0.5, 0.4, 0.3, 0.3, 0.4, 0.4), 25, 100),
    ((0.2, 0.1, 0.1, 0.1, 0.2, 0.0), (0.70, 0.6, 0.5, 0.5, 0.4, 0.3, 0.3, 0.4, 0.4), 25, 200),
    ((0.2, 0.1, 0.1, 0.1, 0.2, 0.0), (0.80, 0.5, 0.2, 0.5, 0.4, 0.3, 0.3, 0.4, 0.4), 25, 200),
)

TABLE6_RESULTS = (
    (0.264, 0.111, 0.108, -0.107, 0.026, -0.041, 0.035, 0.136, 0.012, 0.137, 0.315),
    (0.439, 0.157, 0.046, -0.160, 0.014, -0.081, 0.024, 0.055, 0.009, 0.009, 0.453),
    (0.359, 0.152, 0.090, -0.154, 0.027, -0.074, 0.043, 0.107, 0.017, 0.046, 0.393),
    (0.182, 0.006, 0.016, -0.007, 0.018, 0.002, 0.020, 0.027, 0.008, 0.271, 0.240),
    (0.421, 0.050, 0.036, -0.051, 0.031, -0.013, 0.041, 0.045, 0.027, 0.017, 0.434),
    (0.336, 0.013, 0.021, -0.012, 0.021, 0.004, 0.023, 0.030, 0.012, 0.072, 0.366),
    (0.200, 0.027, 0.055, -0.028, 0.021, -0.000, 0.027, 0.080, 0.017, 0.226, 0.262),
    (0.413, 0.057, 0.036, -0.063, 0.016, -0.025, 0.022, 0.042, 0.013, 0.019, 0.431),
    (0.317, 0.029, 0.038, -0.031, 0.024, -0.003, 0.029, 0.057, 0.023, 0.085, 0.355),
)
