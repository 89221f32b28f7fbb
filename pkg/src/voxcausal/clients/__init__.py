"""Uniform client interfaces to the external model services."""

from .base import (
    ENDPOINTS,
    PROTOCOL_VERSION,
    ClientRequest,
    ClientResponse,
    Kind,
    ModelClient,
    PromptKind,
    PromptProposal,
    RetryPolicy,
    Status,
    VerifyAnswer,
    call_with_retries,
    edit_image,
    embed,
    encode,
    generate_image,
    propose_prompts,
    verify,
)
from .http import HTTPModelClient
from .server import ClientHTTPServer
from .stubs import SimulatorModelClient, StubModelClient

__all__ = [
    "ENDPOINTS",
    "PROTOCOL_VERSION",
    "ClientRequest",
    "ClientResponse",
    "Kind",
    "ModelClient",
    "PromptKind",
    "PromptProposal",
    "RetryPolicy",
    "Status",
    "VerifyAnswer",
    "call_with_retries",
    "edit_image",
    "embed",
    "encode",
    "generate_image",
    "propose_prompts",
    "verify",
    "HTTPModelClient",
    "ClientHTTPServer",
    "SimulatorModelClient",
    "StubModelClient",
]
