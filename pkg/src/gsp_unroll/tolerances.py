"""Tolerances shared by constructors, solvers and tests."""

# exactness required of constructed objects (Laplacian row sums, symmetry)
CONSTRUCTION_TOL = 1e-10
# relative tolerance for property checks (semi-norm identities etc.)
PROPERTY_RTOL = 1e-8
# PSD check for temporal kernels: eigenvalues >= -PSD_RTOL * ||Z||_2
PSD_RTOL = 1e-8
# EMD stops once ||grad|| <= EMD_RTOL * ||Y||_F
EMD_RTOL = 1e-8
# eigenvalues below this fraction of the largest are treated as zero
PINV_RTOL = 1e-10
# relative slack allowed on monotone objective traces
MONOTONE_RTOL = 1e-9
