"""
可复现的随机数流

每个重复实验的随机数流由 (主种子, 样本量, 重复编号, 重采样次数) 派生，
底层使用 numpy 的 PCG64DXSM 位生成器和 SeedSequence 的 spawn_key 机制，
因此各重复实验互不依赖执行顺序，可以并行运行。
"""

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence]


def derive_seed(master_seed: int, *key: int) -> int:
    """
    由主种子和整数键派生一个 64 位子种子

    :param master_seed: 主种子
    :param key: 任意个非负整数，如 (n, replication, attempt)
    :return: 64 位整数种子
    """
    sequence = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: SeedLike) -> np.random.Generator:
    """
    构造随机数生成器

    :param seed: 整数种子、SeedSequence 或已有 Generator（原样返回）
    :return: numpy Generator
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.PCG64DXSM(seed))
