"""Material point method solver with neural-manifold model reduction.

Subpackages:
  fom        explicit full-order MPM stepping
  manifold   neural deformation map (decoder, encoder, inversion)
  training   offline fitting of the deformation map
  rom        reduced-order stepping with hyper-reduction
  io         trajectory and checkpoint file formats
  kernels    compiled/numpy kernel backends
"""

__version__ = "0.1.0"
