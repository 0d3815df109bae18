"""Value normalisation backends.

Typed, validation-enabled fields can be routed through an external
normalisation service after local validation. The service contract is a
POST of {field, datatype, values} answered by {"values": [...]} of the
same length. Failures never lose data: the original values are kept and
the failure is surfaced as a warning.
"""

from __future__ import annotations

from adct.errors import NormalizeFailure

try:
    import requests
except ImportError:  # pragma: no cover - requests is a hard dependency
    requests = None

DEFAULT_TIMEOUT = 5.0
ATTEMPTS = 3  # one try plus two retries


class IdentityNormalizer:
    """Backend used when no service is configured."""

    def normalize(self, field, datatype, values):
        return list(values)


class HttpNormalizer:
    """Posts value batches to a normalisation endpoint.

    `post` is injectable for tests; it must behave like requests.post.
    """

    def __init__(self, service_ip: str, timeout: float = DEFAULT_TIMEOUT, post=None):
        base = service_ip.strip()
        if "://" not in base:
            base = "http://" + base
        self.url = base
        self.timeout = timeout
        self.post = post if post is not None else requests.post

    def normalize(self, field, datatype, values):
        payload = {"field": field, "datatype": datatype, "values": list(values)}
        last = None
        for _ in range(ATTEMPTS):
            try:
                resp = self.post(self.url, json=payload, timeout=self.timeout)
                if getattr(resp, "status_code", 0) != 200:
                    last = "HTTP %s" % getattr(resp, "status_code", "?")
                    continue
                doc = resp.json()
                out = doc.get("values") if isinstance(doc, dict) else None
                if not isinstance(out, list) or len(out) != len(values):
                    raise NormalizeFailure(
                        "service returned %s values for %d inputs"
                        % ("no" if out is None else len(out), len(values))
                    )
                return [str(v) for v in out]
            except NormalizeFailure:
                raise
            except Exception as exc:  # noqa: BLE001 - network layer is opaque
                last = str(exc)
        raise NormalizeFailure("normalisation service unreachable: %s" % last)
