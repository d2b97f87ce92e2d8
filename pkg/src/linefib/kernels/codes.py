"""Integer codes shared by both kernel backends.

A generator is passed to the kernels as ``(kind, params)`` where ``params`` is
a flat float64 array whose layout depends on ``kind``:

=============  =====================================================
CONSTANT       ``[b1, b2]``
HOPF           ``[sign]``
EXOTIC_TAN     ``[]``
ONE_PARAM      ``[slope, offset, n, xs[0..n), thetas[0..n)]``
DISK           ``[]``
SMOOTH_DISK    ``[]``
ELLIPSE        ``[cx, cy, a, b, phi]``
POLYGON        ``[rho, n, xs[0..n), ys[0..n)]`` (convex, counterclockwise)
HALF_HALF      ``[]``
FAT_HELICOID   ``[]``
IDENTITY       ``[]``  (deliberately invalid, for negative tests)
=============  =====================================================

Kinds ``DISK`` through ``FAT_HELICOID`` are compositions ``B = i * f``.
"""

CONSTANT = 0
HOPF = 1
EXOTIC_TAN = 2
ONE_PARAM = 3
DISK = 4
SMOOTH_DISK = 5
ELLIPSE = 6
POLYGON = 7
HALF_HALF = 8
FAT_HELICOID = 9
IDENTITY = 10

COMPOSED = (DISK, SMOOTH_DISK, ELLIPSE, POLYGON, HALF_HALF, FAT_HELICOID)

# half-width of the evaluable exotic strip
STRIP_HALF = 1.5707963267948966 - 1e-12
ONE_PARAM_COS_MIN = 1e-12

# solver status codes
OK = 0
NO_CONVERGENCE = 1
OUTSIDE = 2
BOUNDARY = 3
CAP = 4

# line relation codes
REL_IDENTICAL = 0
REL_PARALLEL = 1
REL_INTERSECTING = 2
REL_SKEW = 3
