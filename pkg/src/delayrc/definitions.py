"""Benchmark constants taken from the standard literature definitions.

Kept in one place so every generator and test reads the same numbers.
"""

# NARMA10: y(n+1) = a*y(n) + b*y(n)*sum_{i=0}^{9} y(n-i) + c*u(n-9)*u(n) + d
NARMA_ORDER = 10
NARMA_A = 0.3
NARMA_B = 0.05
NARMA_C = 1.5
NARMA_D = 0.1
NARMA_INPUT_RANGE = (0.0, 0.5)
NARMA_DIVERGENCE_BOUND = 1.0
NARMA_MAX_RETRIES = 10

# Nonlinear channel equalization.  CHANNEL_TAPS[i] multiplies d(n + 2 - i).
CHANNEL_TAPS = (0.08, -0.12, 1.0, 0.18, -0.1, 0.091, -0.05, 0.04, 0.03, 0.01)
CHANNEL_LOOKAHEAD = 2
CHANNEL_SYMBOLS = (-3.0, -1.0, 1.0, 3.0)
# u = q + CHANNEL_DISTORTION[0]*q**2 + CHANNEL_DISTORTION[1]*q**3
CHANNEL_DISTORTION = (0.036, -0.011)

# Memory-capacity probe: i.i.d. uniform on this interval.
MC_PROBE_RANGE = (-1.0, 1.0)
