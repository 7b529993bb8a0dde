from metarec.serving.events import CtrReport, EventLog, ImpressionRecord, ctr_report, replay
from metarec.serving.service import RecommendationService, ServiceConfig, ServiceError, export_training


def create_app(service):
    """FastAPI app for ``service``; imported lazily so the core needs no web stack."""
    from metarec.serving.app import create_app as _create

    return _create(service)


__all__ = [
    "CtrReport", "EventLog", "ImpressionRecord", "RecommendationService", "ServiceConfig",
    "ServiceError", "create_app", "ctr_report", "export_training", "replay",
]
