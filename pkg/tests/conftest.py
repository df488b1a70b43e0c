import pytest

from primework.chains import FixedLength
from primework.consensus import Block, RetargetConfig, genesis_block
from primework.miner import BlockTemplate, MinerConfig, mine_block


@pytest.fixture(scope="session")
def genesis() -> Block:
    return genesis_block()


@pytest.fixture(scope="session")
def retarget_config() -> RetargetConfig:
    return RetargetConfig()


@pytest.fixture(scope="session")
def mined_block(genesis) -> Block:
    """A real block at target 2.0 on top of genesis, shared across tests."""
    template = BlockTemplate(
        parent=genesis.header,
        payload=b"fixture payload",
        target=FixedLength.from_float(2.0),
        timestamp=1,
    )
    header = mine_block(template, MinerConfig(seed=42))
    assert header is not None
    return Block(header=header, payload=b"fixture payload")
