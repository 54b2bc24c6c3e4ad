"""SPH engine built around a truncated Wendland kernel (cut-off 1.6h).

Subpackages cover kernels, neighbor search, particle generation and
relaxation, kernel-gradient correction, function-approximation error
studies, an Eulerian Riemann-solver fluid solver, a total Lagrangian
solid solver, and the benchmark harness that pairs truncated against
standard-kernel runs to measure the wall-clock ratio alpha.
"""

from sph_trunc.kernels import KernelSpec, kernel_spec, kernel_value, kernel_grad_magnitude, cutoff_radius

__all__ = [
    "KernelSpec",
    "kernel_spec",
    "kernel_value",
    "kernel_grad_magnitude",
    "cutoff_radius",
]
