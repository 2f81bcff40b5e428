"""Shared physical constants and the package-wide phase sign convention."""

SPEED_OF_LIGHT = 3.0e8  # m/s, rounded radar convention

# De-chirped samples carry exp(+1j * DECHIRP_SIGN * 2*pi * (f0*tau + mu*tau*t))
# and steering vectors carry exp(-1j * DECHIRP_SIGN * 2*pi * omega).  The two
# conventions must flip together: flipping only one mirrors the image in both
# angles and moves the beat tone into the negative half of the spectrum.
DECHIRP_SIGN = 1.0
