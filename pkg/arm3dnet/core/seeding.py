"""
난수 시드 분배 모듈

최상위 시드 하나에서 데이터 생성, 초기화, 셔플, 샘플링 스트림을
결정적으로 파생시킨다. 스트림 이름은 crc32로 정수화해 SeedSequence에 섞는다.
"""

import zlib

import numpy as np


def stream_seed(seed: int, name: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))])


def make_rng(seed: int, name: str) -> np.random.Generator:
    """이름 붙은 독립 난수 스트림을 만든다. 같은 (seed, name)은 항상 같은 스트림이다."""
    return np.random.default_rng(stream_seed(seed, name))


def spawn_rngs(seed: int, name: str, count: int) -> list[np.random.Generator]:
    """샘플 궤적마다 하나씩 쓰는 독립 스트림 count개."""
    return [np.random.default_rng(s) for s in stream_seed(seed, name).spawn(count)]
