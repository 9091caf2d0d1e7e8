"""Named pointwise derivatives consumed by the residual operators."""

from __future__ import annotations

from typing import Iterator, Mapping, Sequence

from autodiff.jets import Scalar2
from errors import ContractError


class DerivativeBundle(Mapping):
    """Read-only mapping such as ``{"u": ..., "u_x": ..., "u_xx": ...}``.

    Entries may be NumPy arrays or tape tensors; residual operators only use
    ``+``, ``-`` and ``*`` so either works.
    """

    def __init__(self, entries: Mapping[str, object]) -> None:
        self._entries = dict(entries)

    def __getitem__(self, name: str):
        try:
            return self._entries[name]
        except KeyError:
            raise ContractError(
                f"derivative bundle has no entry {name!r}; "
                f"available: {sorted(self._entries)}"
            ) from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    @classmethod
    def from_jet(
        cls, jet: Scalar2, fields: Sequence[str], axes: Sequence[str]
    ) -> "DerivativeBundle":
        """Split a jet tracked on ``axes`` into entries named after ``fields``."""
        if jet.width != len(fields):
            raise ContractError(
                f"jet has {jet.width} outputs for fields {list(fields)}"
            )
        if jet.n_tracked != len(axes):
            raise ContractError(
                f"jet tracks {jet.n_tracked} axes, expected {list(axes)}"
            )
        entries = {}
        for c, name in enumerate(fields):
            entries[name] = jet.value[:, c]
            for k, axis in enumerate(axes):
                entries[f"{name}_{axis}"] = jet.d1[:, k, c]
                for m in range(k, len(axes)):
                    second = jet.d2[:, k, m, c]
                    entries[f"{name}_{axis}{axes[m]}"] = second
                    entries[f"{name}_{axes[m]}{axis}"] = second
        return cls(entries)
