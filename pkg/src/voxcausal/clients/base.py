"""Wire-level contract for external model services, plus the client-facing ops.

Six request kinds, one POST endpoint each:

    propose_prompts  /v1/propose   {concept, prompt_kind, n} -> {prompts}
    generate_image   /v1/generate  {prompt, concept}         -> {image_ref}
    edit_image       /v1/edit      {image_ref, instruction}  -> {image_ref}
    verify           /v1/verify    {image_ref, concept}      -> {answer: yes|no}
    encode           /v1/encode    {image_ref}               -> {activations, voxel_dim}
    embed            /v1/embed     {text | image_ref}        -> {vector}

Every request body carries ``version`` and an ``idempotency_key`` so retries
are at-most-once on the server side. Responses carry ``status``
(ok | retryable | fatal); retryable statuses are retried with exponential
backoff up to the policy's attempt budget, fatal ones abort the item.

Image pixels never transit this layer: images are opaque refs (URIs).
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

import numpy as np

from ..errors import ClientError, ProtocolError

PROTOCOL_VERSION = 1


class Kind(str, Enum):
    PROPOSE_PROMPTS = "propose_prompts"
    GENERATE_IMAGE = "generate_image"
    EDIT_IMAGE = "edit_image"
    VERIFY = "verify"
    ENCODE = "encode"
    EMBED = "embed"


ENDPOINTS = {
    Kind.PROPOSE_PROMPTS: "/v1/propose",
    Kind.GENERATE_IMAGE: "/v1/generate",
    Kind.EDIT_IMAGE: "/v1/edit",
    Kind.VERIFY: "/v1/verify",
    Kind.ENCODE: "/v1/encode",
    Kind.EMBED: "/v1/embed",
}


class Status(str, Enum):
    OK = "ok"
    RETRYABLE = "retryable"
    FATAL = "fatal"


class PromptKind(str, Enum):
    POSITIVE = "positive"
    COUNTER_CONCEPT = "counter_concept"
    EDIT_INSTRUCTION = "edit_instruction"


@dataclass(frozen=True)
class ClientRequest:
    kind: Kind
    payload: dict
    # Constant across retries of the same logical request; stubs must ignore
    # it so their outputs stay a pure function of (seed, kind, payload).
    idempotency_key: str = field(default_factory=lambda: uuid.uuid4().hex)


@dataclass(frozen=True)
class ClientResponse:
    kind: Kind
    status: Status
    payload: dict
    error: str = ""

    @classmethod
    def ok(cls, kind: Kind, **payload) -> "ClientResponse":
        return cls(kind=kind, status=Status.OK, payload=payload)

    @classmethod
    def retryable(cls, kind: Kind, error: str) -> "ClientResponse":
        return cls(kind=kind, status=Status.RETRYABLE, payload={}, error=error)

    @classmethod
    def fatal(cls, kind: Kind, error: str) -> "ClientResponse":
        return cls(kind=kind, status=Status.FATAL, payload={}, error=error)


class ModelClient(Protocol):
    def call(self, request: ClientRequest) -> ClientResponse: ...


@dataclass(frozen=True)
class RetryPolicy:
    """Total attempt budget and backoff schedule for retryable failures."""

    max_attempts: int = 3
    backoff_base: float = 0.05
    backoff_factor: float = 2.0

    def delay(self, attempt: int) -> float:
        return self.backoff_base * (self.backoff_factor**attempt)


def call_with_retries(
    client: ModelClient, request: ClientRequest, policy: RetryPolicy = RetryPolicy()
) -> ClientResponse:
    """Issue a request, retrying retryable statuses; raise ClientError otherwise."""
    last_error = ""
    for attempt in range(policy.max_attempts):
        response = client.call(request)
        if response.status == Status.OK:
            return response
        if response.status == Status.FATAL:
            raise ClientError(f"{request.kind.value} failed fatally: {response.error}")
        last_error = response.error
        if attempt + 1 < policy.max_attempts and policy.backoff_base > 0:
            time.sleep(policy.delay(attempt))
    raise ClientError(
        f"{request.kind.value} still retryable after {policy.max_attempts} "
        f"attempts: {last_error}"
    )


# --- ops -------------------------------------------------------------------


class VerifyAnswer(str, Enum):
    PRESENT = "present"
    ABSENT = "absent"
    UNVERIFIED = "unverified"


@dataclass(frozen=True)
class PromptProposal:
    prompts: tuple[str, ...]
    dropped: tuple[str, ...] = ()


def propose_prompts(
    concept: str,
    kind: PromptKind,
    n: int,
    client: ModelClient,
    policy: RetryPolicy = RetryPolicy(),
) -> PromptProposal:
    """Ask the prompt proposer for n prompts of the given kind.

    Counter-concept and edit-instruction prompts must not mention the target
    concept (case-insensitive substring); offenders are dropped and reported
    in ``dropped`` rather than silently returned.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    request = ClientRequest(
        kind=Kind.PROPOSE_PROMPTS,
        payload={"concept": concept, "prompt_kind": kind.value, "n": n},
    )
    response = call_with_retries(client, request, policy)
    prompts = response.payload.get("prompts")
    if not isinstance(prompts, list) or not all(isinstance(p, str) for p in prompts):
        raise ProtocolError("propose_prompts response missing a string list 'prompts'")
    if len(prompts) != n:
        raise ProtocolError(f"asked for {n} prompts, got {len(prompts)}")
    if kind == PromptKind.POSITIVE:
        return PromptProposal(prompts=tuple(prompts))
    needle = concept.lower()
    kept = tuple(p for p in prompts if needle not in p.lower())
    dropped = tuple(p for p in prompts if needle in p.lower())
    return PromptProposal(prompts=kept, dropped=dropped)


def verify(
    image_ref: str,
    concept: str,
    client: ModelClient,
    policy: RetryPolicy = RetryPolicy(),
) -> VerifyAnswer:
    """Is the concept present in the image? Failures fold into UNVERIFIED."""
    request = ClientRequest(
        kind=Kind.VERIFY, payload={"image_ref": image_ref, "concept": concept}
    )
    try:
        response = call_with_retries(client, request, policy)
    except ClientError:
        return VerifyAnswer.UNVERIFIED
    answer = response.payload.get("answer")
    if answer == "yes":
        return VerifyAnswer.PRESENT
    if answer == "no":
        return VerifyAnswer.ABSENT
    return VerifyAnswer.UNVERIFIED


def encode(
    image_ref: str, client: ModelClient, policy: RetryPolicy = RetryPolicy()
) -> np.ndarray:
    """Predicted voxel response vector for an image."""
    request = ClientRequest(kind=Kind.ENCODE, payload={"image_ref": image_ref})
    response = call_with_retries(client, request, policy)
    activations = response.payload.get("activations")
    voxel_dim = response.payload.get("voxel_dim")
    if not isinstance(activations, list) or not isinstance(voxel_dim, int):
        raise ProtocolError("encode response must carry 'activations' and 'voxel_dim'")
    if len(activations) != voxel_dim:
        raise ProtocolError(
            f"encode returned {len(activations)} activations but advertises "
            f"voxel_dim {voxel_dim}"
        )
    vec = np.asarray(activations, dtype=np.float64)
    if not np.all(np.isfinite(vec)):
        raise ProtocolError("encode response contains NaN or Inf")
    return vec


def embed(
    client: ModelClient,
    text: str | None = None,
    image_ref: str | None = None,
    policy: RetryPolicy = RetryPolicy(),
) -> np.ndarray:
    """Unit-norm embedding of a text concept or an image ref."""
    if (text is None) == (image_ref is None):
        raise ValueError("pass exactly one of text or image_ref")
    payload = {"text": text} if text is not None else {"image_ref": image_ref}
    response = call_with_retries(client, ClientRequest(kind=Kind.EMBED, payload=payload), policy)
    vector = response.payload.get("vector")
    if not isinstance(vector, list):
        raise ProtocolError("embed response missing 'vector'")
    vec = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if not np.isfinite(norm) or abs(norm - 1.0) > 1e-6:
        raise ProtocolError(f"embed response is not unit-norm (|v| = {norm})")
    return vec


def generate_image(
    prompt: str, concept: str, client: ModelClient, policy: RetryPolicy = RetryPolicy()
) -> str:
    request = ClientRequest(
        kind=Kind.GENERATE_IMAGE, payload={"prompt": prompt, "concept": concept}
    )
    response = call_with_retries(client, request, policy)
    ref = response.payload.get("image_ref")
    if not isinstance(ref, str) or not ref:
        raise ProtocolError("generate_image response missing 'image_ref'")
    return ref


def edit_image(
    image_ref: str,
    instruction: str,
    client: ModelClient,
    policy: RetryPolicy = RetryPolicy(),
) -> str:
    request = ClientRequest(
        kind=Kind.EDIT_IMAGE, payload={"image_ref": image_ref, "instruction": instruction}
    )
    response = call_with_retries(client, request, policy)
    ref = response.payload.get("image_ref")
    if not isinstance(ref, str) or not ref:
        raise ProtocolError("edit_image response missing 'image_ref'")
    return ref
