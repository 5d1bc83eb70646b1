"""Tracing for analysis runs: spans around iterations, explorations and checks."""

import functools
import logging
import threading
import time
from contextlib import contextmanager
from typing import Any, Callable, Dict, Iterator, Optional, TypeVar

try:
    from opentelemetry.sdk.trace import TracerProvider
    from opentelemetry.sdk.trace.export import ConsoleSpanExporter, SimpleSpanProcessor

    OTEL_AVAILABLE = True
except ImportError:
    OTEL_AVAILABLE = False

logger = logging.getLogger(__name__)

F = TypeVar("F", bound=Callable[..., Any])


class NoOpSpan:
    """Span stand-in when tracing is off."""

    def set_attribute(self, key: str, value: Any) -> None:
        pass

    def add_event(self, name: str, attributes: Optional[Dict[str, Any]] = None) -> None:
        pass


class TracingService:
    """Wraps an OpenTelemetry tracer; every method degrades to logging when disabled."""

    def __init__(self, enabled: bool = False) -> None:
        self.enabled = enabled and OTEL_AVAILABLE
        self._tracer = None
        self._provider = None
        self._lock = threading.RLock()

        if self.enabled:
            self._setup_tracing()
        elif enabled and not OTEL_AVAILABLE:
            logger.warning("OpenTelemetry not available, tracing disabled")

    def _setup_tracing(self) -> None:
        try:
            # A private provider keeps repeated services (tests, CLI runs) independent.
            self._provider = TracerProvider()
            self._provider.add_span_processor(SimpleSpanProcessor(ConsoleSpanExporter()))
            self._tracer = self._provider.get_tracer(__name__)
            logger.info("Tracing enabled with console span export")
        except Exception as e:
            logger.error(f"Failed to set up tracing: {e}")
            self.enabled = False

    @contextmanager
    def trace_operation(
        self, operation_name: str, attributes: Optional[Dict[str, Any]] = None
    ) -> Iterator[Any]:
        """Open a span named ``operation_name``; attributes are stringified."""
        if not self.enabled or self._tracer is None:
            yield NoOpSpan()
            return

        with self._tracer.start_as_current_span(operation_name) as span:
            span.set_attribute("thread_id", threading.current_thread().ident or 0)
            for key, value in (attributes or {}).items():
                span.set_attribute(key, str(value))
            try:
                yield span
            except Exception as e:
                span.set_attribute("error", True)
                span.add_event("error", {"exception": str(e)})
                raise

    @contextmanager
    def measure(self, operation_name: str) -> Iterator[Dict[str, float]]:
        """Time a block; the yielded dict receives ``elapsed_seconds`` on exit."""
        timing: Dict[str, float] = {}
        start = time.perf_counter()
        try:
            yield timing
        finally:
            timing["elapsed_seconds"] = time.perf_counter() - start
            self.record_metric(f"{operation_name}_seconds", timing["elapsed_seconds"])

    def record_metric(self, name: str, value: float, attributes: Optional[Dict[str, Any]] = None) -> None:
        with self._lock:
            logger.debug(f"Metric {name}={value} {attributes or {}}")

    def cleanup(self) -> None:
        if self.enabled and self._provider is not None:
            try:
                self._provider.force_flush()
                self._provider.shutdown()
            except Exception as e:
                logger.error(f"Error during tracing cleanup: {e}")

    def get_service_info(self) -> Dict[str, Any]:
        return {
            "enabled": self.enabled,
            "otel_available": OTEL_AVAILABLE,
            "tracer_configured": self._tracer is not None,
        }


_global_tracing_service: Optional[TracingService] = None
_tracing_lock = threading.RLock()


def get_global_tracing_service() -> TracingService:
    global _global_tracing_service

    with _tracing_lock:
        if _global_tracing_service is None:
            _global_tracing_service = TracingService(enabled=False)
        return _global_tracing_service


def set_global_tracing_service(service: TracingService) -> None:
    global _global_tracing_service

    with _tracing_lock:
        _global_tracing_service = service


def traced(operation_name: str) -> Callable[[F], F]:
    """Decorator opening a span on the global tracing service."""

    def decorator(func: F) -> F:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            with get_global_tracing_service().trace_operation(operation_name) as span:
                span.set_attribute("function", func.__qualname__)
                return func(*args, **kwargs)

        return wrapper  # type: ignore[return-value]

    return decorator


def create_tracing_service(enabled: bool = False) -> TracingService:
    return TracingService(enabled)
