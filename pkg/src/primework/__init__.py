"""Prime-chain proof-of-useful-work engine.

The work behind each block is a chain of probable primes anchored at an
origin divisible by the previous block's hash; verification replays two
cheap modular-exponentiation tests per element.  The package covers the
primality layer, chain evaluation, consensus rules (validation, continuous
retargeting, fork choice), a sieve-accelerated miner, a deterministic
network simulator with honest and withholding strategies, and empirical
property analysis.
"""

from .chains import ChainKind, FixedLength, PrimeChain, chain_elements, evaluate_chain, meets_target
from .consensus import (
    BindingMode,
    Block,
    BlockHeader,
    ChainState,
    RetargetConfig,
    Verdict,
    decode_block,
    decode_header,
    encode_block,
    encode_header,
    fork_choice,
    genesis_block,
    header_hash,
    origin_of,
    retarget,
    validate_block,
    validate_pow,
)
from .miner import BlockTemplate, MinerConfig, mine_block, sieve_candidates
from .netsim import SimConfig, SimMetrics, revenue_share, run_simulation, selfish_step
from .primality import (
    FermatResult,
    deterministic_is_prime,
    ell_probable_prime,
    fermat_probable_prime,
    sieve_small_primes,
)

__version__ = "0.1.0"

__all__ = [
    "BindingMode",
    "Block",
    "BlockHeader",
    "BlockTemplate",
    "ChainKind",
    "ChainState",
    "FermatResult",
    "FixedLength",
    "MinerConfig",
    "PrimeChain",
    "RetargetConfig",
    "SimConfig",
    "SimMetrics",
    "Verdict",
    "chain_elements",
    "decode_block",
    "decode_header",
    "deterministic_is_prime",
    "ell_probable_prime",
    "encode_block",
    "encode_header",
    "evaluate_chain",
    "fermat_probable_prime",
    "fork_choice",
    "genesis_block",
    "header_hash",
    "meets_target",
    "mine_block",
    "origin_of",
    "retarget",
    "revenue_share",
    "run_simulation",
    "selfish_step",
    "sieve_candidates",
    "sieve_small_primes",
    "validate_block",
    "validate_pow",
    "__version__",
]
