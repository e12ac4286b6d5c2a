"""
Vectorized interval arithmetic with outward rounding.

An `Interval` holds two float64 arrays `lo <= hi` of the same shape and behaves like a numpy array of intervals under
indexing, broadcasting arithmetic and reductions. The module itself doubles as an array namespace (`xp`) so system
definitions written as `f(x, xp)` evaluate to enclosures when called with `xp=interval`.

Results of arithmetic are widened by one ulp per endpoint; library functions (exp, tanh, sin...) are widened by a few
ulps relative to their magnitude.
"""
import numpy as np

EPS = np.finfo(np.float64).eps
TINY = np.finfo(np.float64).tiny
LIBM_SLACK = 4 * EPS  # relative error allowance of numpy transcendental functions


def _down(values):
    return np.nextafter(values, -np.inf)


def _up(values):
    return np.nextafter(values, np.inf)


def _loosen(lo, hi, rel=LIBM_SLACK):
    return lo - np.abs(lo) * rel - TINY, hi + np.abs(hi) * rel + TINY


class Interval:
    __array_ufunc__ = None  # numpy operands defer to the reflected operators below

    def __init__(self, lo, hi=None):
        lo = np.asarray(lo, dtype=np.float64)
        hi = lo if hi is None else np.asarray(hi, dtype=np.float64)
        lo, hi = np.broadcast_arrays(lo, hi)
        if np.any(lo > hi):
            raise ValueError('Interval with lower bound above upper bound.')
        self.lo = lo
        self.hi = hi

    # region Array protocol --------------------------------------------------------------------------------------------

    @property
    def shape(self):
        return self.lo.shape

    @property
    def ndim(self):
        return self.lo.ndim

    def __len__(self):
        return self.lo.shape[0]

    def __getitem__(self, key):
        return Interval(self.lo[key], self.hi[key])

    def reshape(self, *shape):
        return Interval(self.lo.reshape(*shape), self.hi.reshape(*shape))

    def __repr__(self):
        return f'Interval(lo={self.lo!r}, hi={self.hi!r})'

    # endregion

    @property
    def mid(self):
        return (self.lo + self.hi) / 2

    @property
    def width(self):
        return self.hi - self.lo

    def contains(self, values):
        values = np.asarray(values, dtype=np.float64)
        return (self.lo <= values) & (values <= self.hi)

    def subset(self, other):
        other = as_interval(other)
        return (other.lo <= self.lo) & (self.hi <= other.hi)

    # region Arithmetic ------------------------------------------------------------------------------------------------

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __add__(self, other):
        other = as_interval(other)
        return Interval(_down(self.lo + other.lo), _up(self.hi + other.hi))

    __radd__ = __add__

    def __sub__(self, other):
        other = as_interval(other)
        return Interval(_down(self.lo - other.hi), _up(self.hi - other.lo))

    def __rsub__(self, other):
        return as_interval(other) - self

    def __mul__(self, other):
        if np.isscalar(other) or isinstance(other, np.ndarray):
            c = np.asarray(other, dtype=np.float64)
            a, b = c * self.lo, c * self.hi
            return Interval(_down(np.minimum(a, b)), _up(np.maximum(a, b)))
        other = as_interval(other)
        products = np.stack(np.broadcast_arrays(self.lo * other.lo, self.lo * other.hi,
                                                self.hi * other.lo, self.hi * other.hi))
        return Interval(_down(products.min(axis=0)), _up(products.max(axis=0)))

    __rmul__ = __mul__

    def reciprocal(self):
        if np.any((self.lo <= 0) & (self.hi >= 0)):
            raise ZeroDivisionError('Interval division by an interval containing zero.')
        return Interval(_down(1.0 / self.hi), _up(1.0 / self.lo))

    def __truediv__(self, other):
        if np.isscalar(other) or isinstance(other, np.ndarray):
            c = np.asarray(other, dtype=np.float64)
            if np.any(c == 0):
                raise ZeroDivisionError('Interval division by zero.')
            a, b = self.lo / c, self.hi / c
            return Interval(_down(np.minimum(a, b)), _up(np.maximum(a, b)))
        return self * as_interval(other).reciprocal()

    def __rtruediv__(self, other):
        return as_interval(other) * self.reciprocal()

    def __pow__(self, k):
        if int(k) != k or k < 0:
            raise ValueError(f'Only non-negative integer powers are supported, got {k}.')
        k = int(k)
        if k == 0:
            return Interval(np.ones_like(self.lo))
        if k == 1:
            return self
        a, b = self.lo ** k, self.hi ** k
        if k % 2:
            lo, hi = a, b
        else:
            straddles = (self.lo < 0) & (self.hi > 0)
            lo = np.where(straddles, 0.0, np.minimum(a, b))
            hi = np.maximum(a, b)
        lo, hi = _loosen(lo, hi, (k + 1) * EPS)
        if k % 2 == 0:
            lo = np.maximum(lo, 0.0)
        return Interval(lo, hi)

    def __matmul__(self, matrix):
        """ Product with a constant matrix in center-radius form. """
        matrix = np.asarray(matrix, dtype=np.float64)
        center = self.mid
        radius = _up(np.maximum(self.hi - center, center - self.lo))
        absolute = np.abs(matrix)
        value = center @ matrix
        spread = radius @ absolute
        k = matrix.shape[0]
        slack = (k + 2) * EPS * (np.abs(center) @ absolute + spread) + k * TINY
        return Interval(_down(value - spread - slack), _up(value + spread + slack))

    # endregion


def as_interval(value):
    if isinstance(value, Interval):
        return value
    return Interval(value)


# region Namespace -----------------------------------------------------------------------------------------------------

def stack(items, axis=-1):
    items = [as_interval(item) for item in items]
    return Interval(np.stack(np.broadcast_arrays(*[i.lo for i in items]), axis=axis),
                    np.stack(np.broadcast_arrays(*[i.hi for i in items]), axis=axis))


def sum(x, axis=None):
    x = as_interval(x)
    count = x.lo.size if axis is None else x.lo.shape[axis]
    lo, hi = np.sum(x.lo, axis=axis), np.sum(x.hi, axis=axis)
    slack_lo = count * EPS * np.sum(np.abs(x.lo), axis=axis) + count * TINY
    slack_hi = count * EPS * np.sum(np.abs(x.hi), axis=axis) + count * TINY
    return Interval(_down(lo - slack_lo), _up(hi + slack_hi))


def broadcast_to(x, shape):
    x = as_interval(x)
    return Interval(np.broadcast_to(x.lo, shape), np.broadcast_to(x.hi, shape))


def _monotone(fn, x, clip=None):
    x = as_interval(x)
    lo, hi = _loosen(fn(x.lo), fn(x.hi))
    if clip is not None:
        lo, hi = np.clip(lo, *clip), np.clip(hi, *clip)
    return Interval(lo, hi)


def exp(x):
    result = _monotone(np.exp, x)
    return Interval(np.maximum(result.lo, 0.0), result.hi)


def tanh(x):
    return _monotone(np.tanh, x, clip=(-1.0, 1.0))


def sech2(x):
    """ 1 - tanh^2: increasing on the negative axis, decreasing on the positive one, 1 at 0. """
    x = as_interval(x)
    with np.errstate(over='ignore'):
        a, b = 1.0 / np.cosh(x.lo) ** 2, 1.0 / np.cosh(x.hi) ** 2
    straddles = (x.lo <= 0) & (x.hi >= 0)
    lo = np.where(straddles, np.minimum(a, b), np.where(x.lo > 0, b, a))
    hi = np.where(straddles, 1.0, np.where(x.lo > 0, a, b))
    lo, hi = _loosen(lo, hi)
    return Interval(np.maximum(lo, 0.0), np.minimum(hi, 1.0))


def _periodic(fn, x, peak, trough):
    """ Range of a 2 pi periodic function with maxima at peak + 2 k pi and minima at trough + 2 k pi. """
    x = as_interval(x)
    period = 2 * np.pi
    guard = 8 * EPS * (1 + np.maximum(np.abs(x.lo), np.abs(x.hi)))
    lo_x, hi_x = x.lo - guard, x.hi + guard
    has_peak = peak + period * np.ceil((lo_x - peak) / period) <= hi_x
    has_trough = trough + period * np.ceil((lo_x - trough) / period) <= hi_x
    a, b = fn(x.lo), fn(x.hi)
    lo, hi = _loosen(np.minimum(a, b), np.maximum(a, b))
    full = (x.hi - x.lo) >= period
    lo = np.where(has_trough | full, -1.0, np.maximum(lo, -1.0))
    hi = np.where(has_peak | full, 1.0, np.minimum(hi, 1.0))
    return Interval(lo, hi)


def sin(x):
    return _periodic(np.sin, x, np.pi / 2, -np.pi / 2)


def cos(x):
    return _periodic(np.cos, x, 0.0, np.pi)


def abs(x):
    x = as_interval(x)
    lo = np.where((x.lo <= 0) & (x.hi >= 0), 0.0, np.minimum(np.abs(x.lo), np.abs(x.hi)))
    return Interval(lo, np.maximum(np.abs(x.lo), np.abs(x.hi)))


def sign(x):
    x = as_interval(x)
    return Interval(np.sign(x.lo), np.sign(x.hi))


def minimum(x, y):
    x, y = as_interval(x), as_interval(y)
    return Interval(np.minimum(x.lo, y.lo), np.minimum(x.hi, y.hi))


def maximum(x, y):
    x, y = as_interval(x), as_interval(y)
    return Interval(np.maximum(x.lo, y.lo), np.maximum(x.hi, y.hi))


def intersect(x, y):
    """ Common part of two enclosures of the same quantities. """
    x, y = as_interval(x), as_interval(y)
    lo = np.maximum(x.lo, y.lo)
    return Interval(lo, np.maximum(lo, np.minimum(x.hi, y.hi)))


def relu(x):
    return maximum(x, 0.0)


def heaviside(x):
    """ Derivative of relu with the value 0 at 0. """
    x = as_interval(x)
    return Interval((x.lo > 0).astype(np.float64), (x.hi > 0).astype(np.float64))

# endregion
