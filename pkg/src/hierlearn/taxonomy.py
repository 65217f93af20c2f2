"""Two-level label taxonomy: coarse groups and the species under them.

The on-disk sidecar is line-oriented text::

    taxonomy 1
    group <id> <name>
    species <id> <name> <group_id>

Ids must be dense (0..k-1) and appear in ascending order; names contain no
whitespace. The sidecar is shared between datasets, model files embed a copy.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import FormatError, TaxonomyError

_HEADER = "taxonomy 1"


@dataclass(frozen=True)
class Taxonomy:
    group_names: tuple[str, ...]
    species_names: tuple[str, ...]
    species_group: tuple[int, ...]  # species id -> parent group id

    def __post_init__(self):
        if len(self.species_names) != len(self.species_group):
            raise TaxonomyError("species name/parent lists differ in length")
        for name in self.group_names + self.species_names:
            if not name or any(ch.isspace() for ch in name):
                raise TaxonomyError(f"bad taxonomy name: {name!r}")
        if len(set(self.group_names)) != len(self.group_names):
            raise TaxonomyError("duplicate group name")
        if len(set(self.species_names)) != len(self.species_names):
            raise TaxonomyError("duplicate species name")
        for sid, gid in enumerate(self.species_group):
            if not 0 <= gid < len(self.group_names):
                raise TaxonomyError(f"species {sid} has unknown parent group {gid}")

    @property
    def num_groups(self) -> int:
        return len(self.group_names)

    @property
    def num_species(self) -> int:
        return len(self.species_names)

    def parent(self, species_id: int) -> int:
        if not 0 <= species_id < self.num_species:
            raise TaxonomyError(f"unknown species id {species_id}")
        return self.species_group[species_id]

    def species_of(self, group_id: int) -> tuple[int, ...]:
        if not 0 <= group_id < self.num_groups:
            raise TaxonomyError(f"unknown group id {group_id}")
        return tuple(s for s, g in enumerate(self.species_group) if g == group_id)

    def lines(self) -> list[str]:
        out = [_HEADER]
        for gid, name in enumerate(self.group_names):
            out.append(f"group {gid} {name}")
        for sid, name in enumerate(self.species_names):
            out.append(f"species {sid} {name} {self.species_group[sid]}")
        return out

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(self.lines()) + "\n")

    @classmethod
    def from_lines(cls, lines) -> "Taxonomy":
        rows = [ln.strip() for ln in lines if ln.strip()]
        if not rows or rows[0] != _HEADER:
            raise FormatError("missing taxonomy header")
        groups: list[str] = []
        species: list[tuple[str, int]] = []
        for ln in rows[1:]:
            parts = ln.split()
            if parts[0] == "group" and len(parts) == 3:
                if int(parts[1]) != len(groups):
                    raise FormatError(f"group ids must be dense and ordered: {ln!r}")
                groups.append(parts[2])
            elif parts[0] == "species" and len(parts) == 4:
                if int(parts[1]) != len(species):
                    raise FormatError(f"species ids must be dense and ordered: {ln!r}")
                species.append((parts[2], int(parts[3])))
            else:
                raise FormatError(f"unrecognized taxonomy line: {ln!r}")
        return cls(
            group_names=tuple(groups),
            species_names=tuple(name for name, _ in species),
            species_group=tuple(gid for _, gid in species),
        )

    @classmethod
    def load(cls, path) -> "Taxonomy":
        with open(path) as fh:
            return cls.from_lines(fh)
