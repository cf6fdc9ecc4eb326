from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from counter_attest.cfg.vectors import CounterVector
from counter_attest.hpc.exceptions import CounterConfigError, NondeterministicCounterError

# Instructions retired on the fixed counter plus two programmable registers,
# the first of which sums three branch-like events
BOARD3 = "instructions_retired,cond_branches_retired+jal_retired+jalr_retired,int_loads_retired"

PRESETS: Mapping[str, str] = {
    "board3": BOARD3,
}


@dataclass(frozen=True)
class CounterConfig:
    """
    The counter registers actually wired. Each register sums one or more
    events of the full vector; a register with several events is a composite.
    """

    counters: tuple[str, ...]
    registers: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.registers:
            raise CounterConfigError("At least one counter must be selected")
        for register in self.registers:
            if not register:
                raise CounterConfigError("Empty counter register")
            for index in register:
                if not 0 <= index < len(self.counters):
                    raise CounterConfigError(f"Counter index {index} out of range")

    @classmethod
    def identity(cls, counters: Sequence[str]) -> CounterConfig:
        return cls(tuple(counters), tuple((i,) for i in range(len(counters))))

    @classmethod
    def parse(
        cls,
        spec: str,
        counters: Sequence[str],
        deterministic: Mapping[str, bool] | None = None,
    ) -> CounterConfig:
        """
        Accepts a preset name, "all" (every deterministic counter), or a
        comma-separated list of registers whose events are joined with "+".
        """
        counters = tuple(counters)
        spec = spec.strip()
        if spec == "all":
            registers = tuple(
                (i,)
                for i, name in enumerate(counters)
                if deterministic is None or deterministic.get(name, False)
            )
            return cls(counters, registers)
        spec = PRESETS.get(spec, spec)
        index = {name: i for i, name in enumerate(counters)}
        parsed: list[tuple[int, ...]] = []
        for register in spec.split(","):
            names = [n.strip() for n in register.split("+")]
            unknown = [n for n in names if n not in index]
            if unknown:
                raise CounterConfigError(
                    f"Unknown counter {', '.join(unknown)}. "
                    f"Known counters: {', '.join(counters)}"
                )
            parsed.append(tuple(index[n] for n in names))
        config = cls(counters, tuple(parsed))
        if deterministic is not None:
            config.check_deterministic(deterministic)
        return config

    @property
    def dimension(self) -> int:
        return len(self.registers)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple("+".join(self.counters[i] for i in r) for r in self.registers)

    @property
    def selected(self) -> tuple[int, ...]:
        return tuple(sorted({i for register in self.registers for i in register}))

    @property
    def composites(self) -> tuple[tuple[int, ...], ...]:
        return tuple(r for r in self.registers if len(r) > 1)

    def check_deterministic(self, deterministic: Mapping[str, bool]) -> None:
        offending = [
            self.counters[i]
            for i in self.selected
            if not deterministic.get(self.counters[i], False)
        ]
        if offending:
            raise NondeterministicCounterError(offending)

    def project(self, v: Sequence[int]) -> CounterVector:
        assert len(v) == len(self.counters), (
            f"Vector of dimension {len(v)} projected with a config over "
            f"{len(self.counters)} counters"
        )
        return tuple(sum(v[i] for i in register) for register in self.registers)

    def compose(self, outer: CounterConfig) -> CounterConfig:
        """
        The config equivalent to projecting with self and then with outer,
        whose counters are self's register labels.
        """
        if outer.counters != self.labels:
            raise CounterConfigError("Configs can't be composed: counter labels differ")
        return CounterConfig(
            self.counters,
            tuple(
                tuple(i for r in register for i in self.registers[r])
                for register in outer.registers
            ),
        )


def project(config: CounterConfig, v: Sequence[int]) -> CounterVector:
    return config.project(v)
