"""Backbone loading and feature-tap resolution.

Two model sources: a local TorchScript checkpoint (torch.jit.load), or
`torchvision:<name>[@<weights>]` for a hub architecture. Scripted modules
do not support forward hooks, so their forward output is the only tap;
eager models additionally allow tapping any named submodule, defaulting
to the input of the classification head (the pre-head representation).
"""

from __future__ import annotations

from pathlib import Path

import torch

TORCHVISION_PREFIX = "torchvision:"

# attributes torchvision families use for the classification head, in
# lookup order
HEAD_ATTRS = ("fc", "classifier", "head", "heads")


class ModelError(Exception):
    """Model reference cannot be loaded."""


class TapError(Exception):
    """Requested feature tap point does not exist or is unsupported."""


def load_model(reference: str) -> torch.nn.Module:
    """Load an inference-mode module from a checkpoint path or hub name."""
    if reference.startswith(TORCHVISION_PREFIX):
        spec = reference[len(TORCHVISION_PREFIX):]
        name, _, weights = spec.partition("@")
        if not name:
            raise ModelError(f"empty torchvision model name in '{reference}'")
        from torchvision.models import get_model
        weight_arg = weights or "DEFAULT"
        try:
            module = get_model(name,
                               weights=None if weight_arg.lower() == "none"
                               else weight_arg)
        except (ValueError, KeyError) as exc:
            raise ModelError(f"cannot build torchvision model '{name}': "
                             f"{exc}") from exc
    else:
        path = Path(reference)
        if not path.is_file():
            raise ModelError(f"checkpoint not found: {path}")
        try:
            module = torch.jit.load(str(path), map_location="cpu")
        except (RuntimeError, ValueError) as exc:
            raise ModelError(f"cannot load TorchScript checkpoint {path}: "
                             f"{exc}") from exc
    module.eval()
    return module


def model_id_for(reference: str) -> str:
    """Stable identifier for a model reference (file stem or hub name)."""
    if reference.startswith(TORCHVISION_PREFIX):
        spec = reference[len(TORCHVISION_PREFIX):]
        return spec.partition("@")[0]
    return Path(reference).stem


def tap_points(module: torch.nn.Module) -> list[str]:
    """Named submodules usable with --layer, root excluded."""
    return sorted(name for name, _ in module.named_modules() if name)


class FeatureTap:
    """Runs a module and returns the configured activation per batch.

    Modes: "output" takes the forward return value; "layer" hooks a named
    submodule's output; "prehead" hooks the classification head's input.
    Use as a context manager so hooks are always removed.
    """

    def __init__(self, module: torch.nn.Module, layer: str | None = None):
        self.module = module
        self._captured: list[torch.Tensor] = []
        self._handle = None
        scripted = isinstance(module, torch.jit.ScriptModule)

        if layer is not None:
            if scripted:
                raise TapError(
                    "layer taps require an eager model; a scripted "
                    "checkpoint exposes only its forward output")
            named = dict(module.named_modules())
            named.pop("", None)
            if layer not in named:
                raise TapError(
                    f"unknown layer '{layer}'; available tap points: "
                    f"{', '.join(sorted(named))}")
            self.mode = "layer"
            self._target = named[layer]
        elif not scripted:
            head = next((getattr(module, attr) for attr in HEAD_ATTRS
                         if isinstance(getattr(module, attr, None),
                                       torch.nn.Module)), None)
            if head is not None:
                self.mode = "prehead"
                self._target = head
            else:
                self.mode = "output"
                self._target = None
        else:
            self.mode = "output"
            self._target = None

    def __enter__(self) -> "FeatureTap":
        if self.mode == "layer":
            self._handle = self._target.register_forward_hook(
                lambda mod, inp, out: self._captured.append(out))
        elif self.mode == "prehead":
            self._handle = self._target.register_forward_pre_hook(
                lambda mod, inp: self._captured.append(inp[0]))
        return self

    def __exit__(self, *exc_info) -> None:
        if self._handle is not None:
            self._handle.remove()
            self._handle = None

    def __call__(self, batch: torch.Tensor) -> torch.Tensor:
        self._captured.clear()
        with torch.no_grad():
            output = self.module(batch)
        if self.mode == "output":
            if not isinstance(output, torch.Tensor):
                raise TapError(
                    f"model output is {type(output).__name__}, not a tensor; "
                    f"tap a layer instead")
            return output
        if not self._captured:
            raise TapError("tapped module was never invoked during forward")
        return self._captured[-1]
