"""Streaming quantile estimation with the five-marker P-square method.

Constant memory, one pass; the estimate converges to the empirical quantile
of the stream.  Used for the friction-coefficient lower bounds and for the
supporting half-planes of the ground force hull.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class OnlineQuantile:
    """Five-marker P-square estimator for a single target quantile."""

    target_quantile: float
    count: int = 0
    heights: list = field(default_factory=list)   # marker heights q_1..q_5
    positions: list = field(default_factory=list)  # integer marker positions n_i
    desired: list = field(default_factory=list)    # desired positions n'_i

    def __post_init__(self):
        if not 0.0 < self.target_quantile < 1.0:
            raise ValueError("target quantile must be in (0, 1)")

    def update(self, sample: float) -> None:
        """Fold one sample into the marker state."""
        if not math.isfinite(sample):
            raise ValueError("samples must be finite")
        p = self.target_quantile
        self.count += 1
        if self.count <= 5:
            self.heights.append(sample)
            if self.count == 5:
                self.heights.sort()
                self.positions = [1, 2, 3, 4, 5]
                self.desired = [1.0, 1.0 + 2.0 * p, 1.0 + 4.0 * p, 3.0 + 2.0 * p, 5.0]
            return

        q = self.heights
        n = self.positions
        # locate the cell containing the sample, clamping the extremes
        if sample < q[0]:
            q[0] = sample
            k = 0
        elif sample >= q[4]:
            q[4] = max(q[4], sample)
            k = 3
        else:
            k = 0
            while k < 3 and sample >= q[k + 1]:
                k += 1
        for i in range(k + 1, 5):
            n[i] += 1
        m = self.count
        self.desired = [
            1.0,
            (m - 1) * p / 2.0 + 1.0,
            (m - 1) * p + 1.0,
            (m - 1) * (1.0 + p) / 2.0 + 1.0,
            float(m),
        ]
        self._adjust()

    def _adjust(self) -> None:
        q, n, nd = self.heights, self.positions, self.desired
        for i in (1, 2, 3):
            d = nd[i] - n[i]
            if (d >= 1.0 and n[i + 1] - n[i] > 1) or (d <= -1.0 and n[i - 1] - n[i] < -1):
                d = 1 if d > 0 else -1
                candidate = self._parabolic(i, d)
                if q[i - 1] < candidate < q[i + 1]:
                    q[i] = candidate
                else:
                    q[i] = q[i] + d * (q[i + d] - q[i]) / (n[i + d] - n[i])
                n[i] += d

    def _parabolic(self, i: int, d: int) -> float:
        q, n = self.heights, self.positions
        return q[i] + (d / (n[i + 1] - n[i - 1])) * (
            (n[i] - n[i - 1] + d) * (q[i + 1] - q[i]) / (n[i + 1] - n[i])
            + (n[i + 1] - n[i] - d) * (q[i] - q[i - 1]) / (n[i] - n[i - 1])
        )

    def estimate(self) -> float:
        """Current quantile estimate; exact order statistic while count < 5."""
        if self.count == 0:
            raise ValueError("no samples yet")
        if self.count < 5:
            ordered = sorted(self.heights)
            idx = min(max(math.ceil(self.target_quantile * self.count) - 1, 0), self.count - 1)
            return ordered[idx]
        return self.heights[2]

    @property
    def minimum(self) -> float:
        return self.heights[0] if self.count >= 5 else min(self.heights)

    @property
    def maximum(self) -> float:
        return self.heights[4] if self.count >= 5 else max(self.heights)

    def state(self) -> dict:
        """Snapshot for telemetry."""
        return {
            "p": self.target_quantile,
            "count": self.count,
            "heights": list(self.heights),
            "positions": list(self.positions),
        }


def quantile_update(q: OnlineQuantile, sample: float) -> OnlineQuantile:
    """Functional-style wrapper over OnlineQuantile.update."""
    q.update(sample)
    return q
