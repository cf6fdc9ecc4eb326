from __future__ import annotations

from pathlib import Path

import pytest

from counter_attest.exceptions import UserError
from counter_attest.manifest.exceptions import NameCollisionException, UnknownManifestException
from counter_attest.manifest.file_matching import is_manifest_file, name_from_file_name
from counter_attest.manifest.registry import ManifestRegistry


class TestManifestRegistry:
    def _make_registry(self, name: str) -> ManifestRegistry:
        path = Path(__file__).parent / "test_assets" / "registry" / name
        assert path.exists(), f"Path {path} does not exist"
        return ManifestRegistry(path)

    def test_normal(self) -> None:
        registry = self._make_registry("normal")
        assert set(registry.names) == {"a", "b"}
        assert len(registry) == 2
        assert "a" in registry and "unrelated" not in registry
        assert registry.get("a").program.demo == "fig2"
        assert registry.get("b").program.demo == "hello"

    def test_entries(self) -> None:
        registry = self._make_registry("normal")
        entry = registry.entries["a"]
        assert entry.name == "a"
        assert entry.toml_path == registry.root_path / "a" / "counter-attest.toml"
        assert entry.manifest is registry.get("a")

    def test_unknown_name(self) -> None:
        registry = self._make_registry("normal")
        with pytest.raises(KeyError):
            registry.get("unrelated")
        with pytest.raises(UnknownManifestException, match="Available: a, b") as info:
            registry.get("missing")
        assert isinstance(info.value, UserError)
        assert str(info.value) == "No manifest named missing. Available: a, b"

    def test_name_conflict(self) -> None:
        registry = self._make_registry("name_conflict")
        with pytest.raises(NameCollisionException, match="same is claimed") as info:
            list(registry.names)
        assert [p.parent.name for p in info.value.paths] == ["x", "y"]

    def test_shipped_experiments(self) -> None:
        root = Path(__file__).parents[2] / "experiments"
        registry = ManifestRegistry(root)
        assert set(registry.names) == {"basic", "added-counters", "added-ecalls"}
        assert registry.get("added-ecalls").program.demo == "crypto-in-loop"
        assert registry.get("added-counters").hpc.counters == "all"


class TestFileMatching:
    def test_names(self) -> None:
        assert name_from_file_name(Path("counter-attest-crypto.toml")) == "crypto"
        assert name_from_file_name(Path("dir/counter-attest.toml")) is None
        assert name_from_file_name(Path("unrelated.toml")) is None

    def test_only_files_match(self, tmp_path: Path) -> None:
        (tmp_path / "counter-attest-dir.toml").mkdir()
        (tmp_path / "counter-attest-x.toml").write_text("")
        (tmp_path / "other.toml").write_text("")
        assert is_manifest_file(tmp_path / "counter-attest-x.toml")
        assert not is_manifest_file(tmp_path / "counter-attest-dir.toml")
        assert not is_manifest_file(tmp_path / "other.toml")
