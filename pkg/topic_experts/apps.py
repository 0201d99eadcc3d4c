"""
django-topic-experts

Expert ranking pipeline and the read-only API over its index.
"""
import logging

from django.apps import AppConfig
from django.conf import settings

logger = logging.getLogger(__name__)


class TopicExpertsConfig(AppConfig):
    name = "topic_experts"
    default = True

    def ready(self):
        # Parse the catalog at startup.
        from topic_experts.catalog import get_catalog

        catalog = get_catalog()
        if not getattr(settings, "TOPIC_EXPERTS_INDEX_DIR", None):
            logger.debug("TOPIC_EXPERTS_INDEX_DIR is not set; the API will answer 503 until it is")
        logger.debug("Loaded feature catalog with %d features", len(catalog))
