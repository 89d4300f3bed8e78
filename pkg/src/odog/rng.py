"""Counter-based random numbers for bit-exact replay.

Every random quantity in a run is a pure function of (seed, sample id,
optional point fingerprint), so runs replay identically regardless of
evaluation order, thread count, or process restarts.  The generator is a
splitmix64 stream feeding Box-Muller; it is vectorisable with uint64
numpy arrays and cheap enough to re-derive on every oracle call.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)

# numpy emits no warning for wrapping uint64 arithmetic, which is exactly
# the modular arithmetic splitmix64 needs.


def mix64(z):
    """splitmix64 finalizer; accepts uint64 scalars or arrays."""
    z = np.uint64(z) if np.isscalar(z) else z.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):  # modular arithmetic wraps by design
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _as_u64(value):
    return np.uint64(int(value) & 0xFFFFFFFFFFFFFFFF)


def stream_key(seed, sample_id, fingerprint=0):
    """Derive the per-call stream key from (seed, sample_id, fingerprint)."""
    with np.errstate(over="ignore"):
        k0 = mix64(_as_u64(seed) ^ _GOLDEN)
        k1 = mix64(k0 + _as_u64(sample_id) * _GOLDEN)
        return mix64(k1 ^ _as_u64(fingerprint))


def point_fingerprint(x):
    """Order-sensitive 64-bit digest of a float64 vector's bit pattern."""
    xb = np.ascontiguousarray(x, dtype=np.float64).view(np.uint64)
    idx = np.arange(1, xb.shape[0] + 1, dtype=np.uint64) * _GOLDEN
    h = mix64(xb + idx)
    out = np.uint64(0)
    for v in h:
        out ^= v
    return out


def _uniforms(key, count):
    # raw_j = mix64(key + (j+1)*GOLDEN), mapped into (0, 1]
    idx = np.arange(1, count + 1, dtype=np.uint64) * _GOLDEN
    raw = mix64(np.uint64(key) + idx)
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def standard_normal(key, dim):
    """dim i.i.d. N(0,1) draws from the stream under `key` (Box-Muller)."""
    pairs = (dim + 1) // 2
    u = _uniforms(key, 2 * pairs)
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:dim]


def standard_normal_block(seed, sample_ids, dim):
    """Row i holds standard_normal(stream_key(seed, sample_ids[i]), dim).

    Vectorised across sample ids; bit-identical to the per-call path.
    """
    ids = np.asarray(sample_ids, dtype=np.uint64)
    k0 = mix64(_as_u64(seed) ^ _GOLDEN)
    keys = mix64(mix64(k0 + ids * _GOLDEN))  # fingerprint 0
    pairs = (dim + 1) // 2
    idx = np.arange(1, 2 * pairs + 1, dtype=np.uint64) * _GOLDEN
    raw = mix64(keys[:, None] + idx[None, :])
    u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u1, u2 = u[:, 0::2], u[:, 1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty((ids.shape[0], 2 * pairs))
    z[:, 0::2] = r * np.cos(2.0 * np.pi * u2)
    z[:, 1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:, :dim]


def uniform_index(seed, tag, n):
    """Deterministic draw from {0, ..., n-1} keyed by (seed, tag)."""
    if n <= 0:
        raise ValueError("n must be positive")
    key = stream_key(seed, tag)
    u = float(_uniforms(key, 1)[0])
    idx = int(u * n)
    return min(idx, n - 1)
