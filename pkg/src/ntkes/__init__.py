"""Two-layer ReLU network gradient descent with NTK-based early stopping.

Library layout:
  kernel      -- closed-form NTK, gram matrices, eigendecomposition, decay slopes
  network     -- symmetric init, forward pass, full-batch GD training, weight drift
  kernel_gd   -- kernel gradient descent comparator and decomposition diagnostics
  complexity  -- kernel complexity, fixed points, stopping time, rate slopes
  montecarlo  -- Monte-Carlo kernel estimators and uniform-convergence scans
  data        -- sphere sampling, targets, noise, risk estimation
  experiments -- the four experiment pipelines and report writing
  cli         -- the `ntkes` command-line entry point
"""

__version__ = "0.1.0"
