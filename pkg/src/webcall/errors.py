"""Error types shared by every service surface."""

from __future__ import annotations


class ApiError(Exception):
    """Service-level failure carrying the HTTP status it maps to.

    Raised by the cores; the HTTP layers serialize it as
    ``{"error": {"code": <status>, "message": <text>}}``.
    """

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message

    def body(self) -> dict:
        return {"error": {"code": self.code, "message": self.message}}


def bad_request(message: str) -> ApiError:
    return ApiError(400, message)


def unauthorized(message: str = "authentication required") -> ApiError:
    return ApiError(401, message)


def forbidden(message: str) -> ApiError:
    return ApiError(403, message)


def not_found(message: str) -> ApiError:
    return ApiError(404, message)


def conflict(message: str) -> ApiError:
    return ApiError(409, message)
