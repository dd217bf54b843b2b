"""Monte Carlo rendering as a stochastic denoising process.

Subpackages and modules:
    pathtracer  -- analytic-scene renderer with per-pixel diffuse/specular statistics
    sde         -- scalar and vector estimator SDE simulation (Euler-Maruyama)
    schedule    -- diffusion noise schedules, log-SNR mapper, sample-count ordering
    ratio       -- specular/diffuse variance-ratio bound via hemisphere quadrature
    metrics     -- two-sample distribution metrics (MMD, moments, spectrum, range)
    cli         -- experiment command-line harness
"""

__version__ = "0.1.0"
