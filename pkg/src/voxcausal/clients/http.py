"""HTTP adapter: one POST endpoint per request kind.

Transport failures and 5xx map to retryable, 4xx to fatal. The retry loop
itself lives in :func:`..base.call_with_retries`; this adapter performs a
single attempt per call so the two layers never multiply retries.
"""

from __future__ import annotations

import requests

from .base import ENDPOINTS, PROTOCOL_VERSION, ClientRequest, ClientResponse, Kind, Status


class HTTPModelClient:
    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def call(self, request: ClientRequest) -> ClientResponse:
        url = self.base_url + ENDPOINTS[request.kind]
        body = {
            "version": PROTOCOL_VERSION,
            "idempotency_key": request.idempotency_key,
            **request.payload,
        }
        try:
            http_response = requests.post(url, json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            return ClientResponse.retryable(request.kind, f"transport error: {exc}")
        if http_response.status_code >= 500:
            return ClientResponse.retryable(
                request.kind, f"server error {http_response.status_code}"
            )
        if http_response.status_code >= 400:
            return ClientResponse.fatal(
                request.kind, f"client error {http_response.status_code}"
            )
        try:
            data = http_response.json()
        except ValueError:
            return ClientResponse.fatal(request.kind, "response body is not JSON")
        if not isinstance(data, dict) or "status" not in data:
            return ClientResponse.fatal(request.kind, "response missing 'status'")
        try:
            status = Status(data["status"])
        except ValueError:
            return ClientResponse.fatal(request.kind, f"unknown status {data['status']!r}")
        payload = {k: v for k, v in data.items() if k not in ("status", "error")}
        return ClientResponse(
            kind=request.kind,
            status=status,
            payload=payload,
            error=str(data.get("error", "")),
        )


def client_for_kind(endpoints: dict[str, str], kind: Kind, timeout: float = 10.0):
    """Build an HTTP client from a {kind value or 'default': base_url} map."""
    url = endpoints.get(kind.value, endpoints.get("default"))
    if not url:
        raise ValueError(f"no endpoint configured for {kind.value}")
    return HTTPModelClient(url, timeout=timeout)
