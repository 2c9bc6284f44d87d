"""Four-tier residency state machine: GPU, pinned host, pageable host, disk.

Chunks are statically assigned to a tier list by hotness rank.  On access a
chunk is served from the fastest queue that holds it and may be cached in
the queue matching its list.  Each queue is LRU-evicting with a fixed chunk
capacity.  Promotion copies: a chunk moved up stays resident below.
"""

from __future__ import annotations

import enum
from collections import OrderedDict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .hotness import split_points


class Tier(enum.IntEnum):
    GPU = 0
    PIN = 1
    PAGE = 2
    DISK = 3


class Link(enum.IntEnum):
    DISK_TO_PAGE = 0
    PAGE_TO_PIN = 1
    PIN_TO_GPU = 2


# staging path to the GPU from each tier; pageable data always bounces through pinned memory
PATHS = {
    Tier.GPU: (),
    Tier.PIN: (Link.PIN_TO_GPU,),
    Tier.PAGE: (Link.PAGE_TO_PIN, Link.PIN_TO_GPU),
    Tier.DISK: (Link.DISK_TO_PAGE, Link.PAGE_TO_PIN, Link.PIN_TO_GPU),
}


@dataclass(frozen=True)
class TierListAssignment:
    gpu_list: frozenset[int]
    pin_list: frozenset[int]
    page_list: frozenset[int]
    disk_list: frozenset[int]

    def home(self, cid: int) -> Tier:
        if cid in self.gpu_list:
            return Tier.GPU
        if cid in self.pin_list:
            return Tier.PIN
        if cid in self.page_list:
            return Tier.PAGE
        if cid in self.disk_list:
            return Tier.DISK
        raise KeyError(f"unknown chunk id {cid}")

    def sizes(self) -> tuple[int, int, int, int]:
        return len(self.gpu_list), len(self.pin_list), len(self.page_list), len(self.disk_list)

    def __contains__(self, cid: int) -> bool:
        return any(cid in s for s in (self.gpu_list, self.pin_list, self.page_list, self.disk_list))


def build_lists(sorted_ids: Sequence[int], tau_gpu: float, tau_pin: float, tau_page: float) -> TierListAssignment:
    ids = list(sorted_ids)
    i1, i2, i3 = split_points(len(ids), tau_gpu, tau_pin, tau_page)
    return TierListAssignment(
        frozenset(ids[:i1]), frozenset(ids[i1:i2]), frozenset(ids[i2:i3]), frozenset(ids[i3:])
    )


@dataclass(frozen=True)
class AccessOutcome:
    id: int
    hit_tier: Tier
    transfers: tuple[tuple[Link, int], ...] = ()
    evictions: tuple[tuple[Tier, int], ...] = ()


class LruQueue:
    """Fixed-capacity set of chunk ids, most recently used last."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = capacity
        self._items: OrderedDict[int, None] = OrderedDict()

    def __contains__(self, cid: int) -> bool:
        return cid in self._items

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        # most recent first
        return reversed(self._items)

    def get(self, cid: int) -> None:
        self._items.move_to_end(cid)

    def put(self, cid: int) -> list[int]:
        """Insert or refresh ``cid``; returns evicted ids."""
        if self.capacity == 0:
            return []
        if cid in self._items:
            self._items.move_to_end(cid)
            return []
        evicted = []
        while len(self._items) >= self.capacity:
            evicted.append(self._items.popitem(last=False)[0])
        self._items[cid] = None
        return evicted

    def clear(self) -> None:
        self._items.clear()


@dataclass
class PlacementState:
    lists: TierListAssignment
    cap_gpu: int | None = None
    cap_pin: int | None = None
    cap_page: int | None = None
    queues: dict[Tier, LruQueue] = field(init=False)

    def __post_init__(self):
        gpu, pin, page, _ = self.lists.sizes()
        self.cap_gpu = gpu if self.cap_gpu is None else self.cap_gpu
        self.cap_pin = pin if self.cap_pin is None else self.cap_pin
        self.cap_page = page if self.cap_page is None else self.cap_page
        self.queues = {
            Tier.GPU: LruQueue(self.cap_gpu),
            Tier.PIN: LruQueue(self.cap_pin),
            Tier.PAGE: LruQueue(self.cap_page),
        }

    def resident(self, tier: Tier) -> list[int]:
        """Ids in ``tier``'s queue, most recently used first."""
        return list(self.queues[tier])

    def preload(self, tier: Tier, ids: Iterable[int]) -> None:
        for cid in ids:
            self.queues[tier].put(cid)

    def check_capacity(self) -> None:
        for tier, q in self.queues.items():
            if len(q) > q.capacity:
                raise AssertionError(f"{tier.name} queue holds {len(q)} > capacity {q.capacity}")

    def reset(self) -> None:
        for q in self.queues.values():
            q.clear()


def _cache(state: PlacementState, tier: Tier, cid: int, evictions: list) -> None:
    evictions.extend((tier, e) for e in state.queues[tier].put(cid))


def access(cid: int, state: PlacementState, nbytes: int = 0) -> AccessOutcome:
    """Serve one chunk access and update residency.

    ``nbytes`` is the size of the chunk as stored; it only annotates the
    reported transfers.
    """
    lists, q = state.lists, state.queues
    if cid not in lists:
        raise KeyError(f"unknown chunk id {cid}")
    evictions: list[tuple[Tier, int]] = []

    if cid in q[Tier.GPU]:
        q[Tier.GPU].get(cid)
        hit = Tier.GPU
    elif cid in q[Tier.PIN]:
        q[Tier.PIN].get(cid)
        hit = Tier.PIN
        if cid in lists.gpu_list:
            _cache(state, Tier.GPU, cid, evictions)
    elif cid in q[Tier.PAGE]:
        q[Tier.PAGE].get(cid)
        hit = Tier.PAGE
        if cid in lists.gpu_list:
            _cache(state, Tier.GPU, cid, evictions)
        if cid in lists.pin_list:
            _cache(state, Tier.PIN, cid, evictions)
    else:
        hit = Tier.DISK
        home = lists.home(cid)
        if home is not Tier.DISK:
            _cache(state, home, cid, evictions)

    transfers = tuple((link, nbytes) for link in PATHS[hit])
    return AccessOutcome(cid, hit, transfers, tuple(evictions))


def reset(state: PlacementState) -> PlacementState:
    state.reset()
    return state
