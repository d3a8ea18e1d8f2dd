"""Synchronous client facade over the service.

By default requests run in-process against the ASGI app, so the CLI needs
no running server; pass ``base_url`` to talk to a remote instance instead.
"""

from __future__ import annotations

import asyncio

import httpx

from .app import create_app

# band solve plus scenario loops run for minutes, so no read timeout
REMOTE_TIMEOUT = httpx.Timeout(10.0, read=None)


class ServiceError(RuntimeError):
    """Non-2xx response from the service, with the structured body."""

    def __init__(self, status_code: int, body):
        self.status_code = status_code
        self.body = body
        if isinstance(body, dict) and "message" in body:
            detail = f"{body.get('error', 'error')}: {body['message']}"
        else:
            detail = str(body)
        super().__init__(f"service returned {status_code}: {detail}")


class ServiceClient:
    """POST/GET helper returning parsed JSON, raising ServiceError on 4xx/5xx."""

    def __init__(self, base_url: str | None = None):
        self._remote = None
        self._app = None
        if base_url is None:
            self._app = create_app()
        else:
            self._remote = httpx.Client(base_url=base_url, timeout=REMOTE_TIMEOUT)

    def close(self) -> None:
        if self._remote is not None:
            self._remote.close()

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _call(self, method: str, path: str, payload=None) -> httpx.Response:
        if self._remote is not None:
            return self._remote.request(method, path, json=payload)

        async def go() -> httpx.Response:
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://phcbeta.internal"
            ) as client:
                return await client.request(method, path, json=payload)

        return asyncio.run(go())

    def _parse(self, response: httpx.Response) -> dict:
        try:
            body = response.json()
        except ValueError:
            body = response.text
        if response.status_code >= 400:
            raise ServiceError(response.status_code, body)
        return body

    def get(self, path: str) -> dict:
        return self._parse(self._call("GET", path))

    def post(self, path: str, payload: dict) -> dict:
        return self._parse(self._call("POST", path, payload))
