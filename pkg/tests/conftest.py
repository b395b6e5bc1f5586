import os

# tiny matmuls dominate the training math; BLAS thread dispatch only slows them
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
