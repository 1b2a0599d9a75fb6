"""Committed PRNG substream rule.

Every stochastic ingredient of an experiment (input channel, initial
condition, noise injection, weight draw) pulls from its own PCG64
substream, derived from a 64-bit user seed plus a (domain, index) spawn
key.  Results therefore do not depend on evaluation order or thread
count, and identical seeds reproduce bit-identical streams on every
platform numpy supports.
"""

import numpy as np

# Spawn-key domains.  New domains must be appended, never renumbered,
# or committed streams change.
DOMAIN_SEQUENCE = 0
DOMAIN_CHANNEL = 1
DOMAIN_IC = 2
DOMAIN_NOISE = 3
DOMAIN_WEIGHTS = 4
DOMAIN_FIBRE = 5


def substream(seed, domain, index=0):
    """Return the committed Generator for (seed, domain, index).

    Parameters
    ----------
    seed : int
        64-bit experiment seed.
    domain : int
        One of the DOMAIN_* constants.
    index : int
        Channel / initial-condition / attempt index within the domain.
    """
    key = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(domain), int(index)))
    return np.random.Generator(np.random.PCG64(key))
