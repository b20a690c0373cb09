import pytest
from pathlib import Path

from vmfista.datagen import (ExperimentSpec, make_experiment,
                             plain_reference_config, reference_solution)
from vmfista.problems import KLTVDeblur, WeightedL2Denoise

CACHE_DIR = Path(__file__).parent / ".refcache"


@pytest.fixture(scope="session")
def denoise_instance():
    """32x32 weighted-l2 + TV denoising instance with a cached reference."""
    spec = ExperimentSpec(source="piecewise", scale=32,
                          intensity_range=(0.0, 400.0), sigma_psf=0.0,
                          background=0.01, rng_seed=7)
    gt, z, _ = make_experiment(spec)
    model = WeightedL2Denoise(z, 0.01, 0.15)
    problem = model.to_composite()
    x_star, f_star, _ = reference_solution(
        problem, plain_reference_config(L0=30.0, iters=5000), z.copy(),
        cache_dir=CACHE_DIR)
    return dict(spec=spec, gt=gt, z=z, model=model, problem=problem,
                x_star=x_star, f_star=f_star)


@pytest.fixture(scope="session")
def deblur_instance():
    """32x32 KL + TV deblurring instance with a cached reference."""
    spec = ExperimentSpec(source="piecewise", scale=32,
                          intensity_range=(0.0, 1.0), sigma_psf=1.4,
                          background=0.01, rng_seed=11)
    gt, z, op = make_experiment(spec)
    model = KLTVDeblur(z, 0.01, op, 0.004, 1e-4)
    problem = model.to_composite()
    x_star, f_star, _ = reference_solution(
        problem, plain_reference_config(L0=1.0, iters=5000), z.copy(),
        cache_dir=CACHE_DIR)
    return dict(spec=spec, gt=gt, z=z, op=op, model=model, problem=problem,
                x_star=x_star, f_star=f_star)


def first_hit(trace, f_star, tol):
    """First iteration index with relative error at or below tol."""
    for r in trace:
        if (r.F_value - f_star) / abs(f_star) <= tol:
            return r.k
    return float("inf")
