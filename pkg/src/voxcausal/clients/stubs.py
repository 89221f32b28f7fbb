"""Deterministic in-process model clients.

``StubModelClient`` answers every request kind as a pure function of
(seed, kind, payload) via SHA-256, so outputs are identical across runs,
hosts, and thread schedules. ``SimulatorModelClient`` backs verify/encode/
embed with a synthetic world, which is what the pipeline uses for
end-to-end runs without hosted models.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .base import ClientRequest, ClientResponse, Kind, PromptKind

_SCENES = (
    "in soft morning light",
    "on a rainy street corner",
    "inside a cluttered workshop",
    "at a quiet harbor",
    "against a plain studio backdrop",
    "in a crowded market",
    "under overcast sky",
    "in a sunlit courtyard",
)

# Concept-free noun phrases for counter-concept proposals.
_COUNTER_NOUNS = (
    "granite boulder",
    "copper kettle",
    "paper lantern",
    "wicker basket",
    "ceramic vase",
    "wooden ladder",
    "canvas awning",
    "steel railing",
    "glass bottle",
    "velvet curtain",
    "clay pot",
    "rope bridge",
    "brick chimney",
    "tin roof",
    "marble column",
)

# Templates intentionally avoid naming the target concept.
_EDIT_TEMPLATES = (
    "remove the main subject and extend the surrounding background",
    "replace the central subject with a {noun}",
    "paint over the key element with matching scenery",
    "swap the focal object for a {noun} of similar size",
    "erase the defining feature and keep everything else unchanged",
)


def _digest(seed: int, kind: str, payload: dict) -> bytes:
    canon = json.dumps(payload, sort_keys=True, ensure_ascii=True)
    return hashlib.sha256(f"{seed}|{kind}|{canon}".encode("utf-8")).digest()


def _rng_from(digest: bytes) -> np.random.Generator:
    return np.random.default_rng(int.from_bytes(digest[:16], "little"))


class StubModelClient:
    """Fully deterministic stand-in for all six model services."""

    def __init__(self, seed: int = 0, voxel_dim: int = 8, embed_dim: int = 16):
        self.seed = seed
        self.voxel_dim = voxel_dim
        self.embed_dim = embed_dim

    def call(self, request: ClientRequest) -> ClientResponse:
        digest = _digest(self.seed, request.kind.value, request.payload)
        handler = {
            Kind.PROPOSE_PROMPTS: self._propose,
            Kind.GENERATE_IMAGE: self._generate,
            Kind.EDIT_IMAGE: self._edit,
            Kind.VERIFY: self._verify,
            Kind.ENCODE: self._encode,
            Kind.EMBED: self._embed,
        }[request.kind]
        return handler(request.payload, digest)

    def _propose(self, payload: dict, digest: bytes) -> ClientResponse:
        concept = str(payload.get("concept", ""))
        kind = PromptKind(payload.get("prompt_kind", "positive"))
        n = int(payload.get("n", 1))
        offset = digest[0]
        prompts: list[str] = []
        if kind == PromptKind.POSITIVE:
            for i in range(n):
                scene = _SCENES[(offset + i) % len(_SCENES)]
                prompts.append(f"a detailed photo of {concept}, {scene}, variation {i}")
        elif kind == PromptKind.COUNTER_CONCEPT:
            needle = concept.lower()
            pool = [w for w in _COUNTER_NOUNS if needle not in w.lower()] or ["plain fabric"]
            for i in range(n):
                noun = pool[(offset + i) % len(pool)]
                suffix = f" {i // len(pool)}" if i >= len(pool) else ""
                prompts.append(f"{noun}{suffix}")
        else:
            needle = concept.lower()
            nouns = [w for w in _COUNTER_NOUNS if needle not in w.lower()] or ["plain fabric"]
            for i in range(n):
                template = _EDIT_TEMPLATES[(offset + i) % len(_EDIT_TEMPLATES)]
                prompts.append(template.format(noun=nouns[(offset + i) % len(nouns)]))
        return ClientResponse.ok(Kind.PROPOSE_PROMPTS, prompts=prompts)

    def _generate(self, payload: dict, digest: bytes) -> ClientResponse:
        return ClientResponse.ok(Kind.GENERATE_IMAGE, image_ref=f"stub://img/{digest.hex()[:16]}")

    def _edit(self, payload: dict, digest: bytes) -> ClientResponse:
        return ClientResponse.ok(Kind.EDIT_IMAGE, image_ref=f"stub://edit/{digest.hex()[:16]}")

    def _verify(self, payload: dict, digest: bytes) -> ClientResponse:
        return ClientResponse.ok(Kind.VERIFY, answer="yes" if digest[0] % 2 == 0 else "no")

    def _encode(self, payload: dict, digest: bytes) -> ClientResponse:
        vec = _rng_from(digest).standard_normal(self.voxel_dim)
        return ClientResponse.ok(
            Kind.ENCODE, activations=[float(x) for x in vec], voxel_dim=self.voxel_dim
        )

    def _embed(self, payload: dict, digest: bytes) -> ClientResponse:
        vec = _rng_from(digest).standard_normal(self.embed_dim)
        vec = vec / np.linalg.norm(vec)
        return ClientResponse.ok(Kind.EMBED, vector=[float(x) for x in vec])


class SimulatorModelClient:
    """Verify/encode/embed backed by a synthetic world.

    ``registry`` maps image refs to the world's image descriptors; the
    verifier answers from descriptor flags and the encoder returns the
    world's simulated response for the descriptor, exactly.
    """

    def __init__(self, world, registry, stream: str = "predicted"):
        from .. import simulator  # local import to avoid a cycle

        self._sim = simulator
        self.world = world
        self.registry = registry
        self.stream = stream

    @property
    def voxel_dim(self) -> int:
        return self.world.n_voxels

    def call(self, request: ClientRequest) -> ClientResponse:
        if request.kind == Kind.VERIFY:
            ref = request.payload.get("image_ref", "")
            if ref not in self.registry:
                return ClientResponse.fatal(Kind.VERIFY, f"unknown image ref {ref!r}")
            concept = str(request.payload.get("concept", ""))
            present = concept in self.registry[ref].flags
            return ClientResponse.ok(Kind.VERIFY, answer="yes" if present else "no")
        if request.kind == Kind.ENCODE:
            ref = request.payload.get("image_ref", "")
            if ref not in self.registry:
                return ClientResponse.fatal(Kind.ENCODE, f"unknown image ref {ref!r}")
            vec = self._sim.simulate_response(self.world, self.registry[ref], stream=self.stream)
            return ClientResponse.ok(
                Kind.ENCODE,
                activations=[float(x) for x in vec],
                voxel_dim=self.world.n_voxels,
            )
        if request.kind == Kind.EMBED:
            if "text" in request.payload:
                vec = self._sim.embed_concept(self.world, str(request.payload["text"]))
            else:
                ref = request.payload.get("image_ref", "")
                if ref not in self.registry:
                    return ClientResponse.fatal(Kind.EMBED, f"unknown image ref {ref!r}")
                vec = self._sim.embed_flags(self.world, self.registry[ref].flags)
            return ClientResponse.ok(Kind.EMBED, vector=[float(x) for x in vec])
        return ClientResponse.fatal(
            request.kind, f"simulator backend does not serve {request.kind.value}"
        )
