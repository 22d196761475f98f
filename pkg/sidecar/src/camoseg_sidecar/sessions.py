"""LRU session store for uploaded videos.

A session holds the decoded frame stack for one video so forward and
backward tracking passes reuse a single upload. Capacity is small by design
(a couple of in-flight videos, each tracked twice); evicted ids answer like
unknown ids.
"""

from __future__ import annotations

import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

DEFAULT_CAPACITY = 4


@dataclass
class Session:
    frames: list[np.ndarray]
    created_at: float = field(default_factory=time.time)

    @property
    def size(self) -> tuple[int, int]:
        h, w = self.frames[0].shape[:2]
        return (w, h)


class SessionStore:
    def __init__(self, capacity: int = DEFAULT_CAPACITY) -> None:
        if capacity < 1:
            raise ValueError("session capacity must be >= 1")
        self.capacity = capacity
        self._lock = threading.Lock()
        self._sessions: OrderedDict[str, Session] = OrderedDict()

    def create(self, frames: list[np.ndarray]) -> str:
        session_id = uuid.uuid4().hex
        with self._lock:
            self._sessions[session_id] = Session(frames=frames)
            while len(self._sessions) > self.capacity:
                self._sessions.popitem(last=False)
        return session_id

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is not None:
                self._sessions.move_to_end(session_id)
            return session

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)
