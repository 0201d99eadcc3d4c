import hmac
import logging

from django.conf import settings
from django.http import JsonResponse
from django.views.decorators.csrf import csrf_exempt
from django.views.decorators.http import require_GET, require_POST

from topic_experts.exceptions import MissingArtifactError, TopicNotFound, UserNotFound
from topic_experts.snapshot import get_index, reload_index

logger = logging.getLogger(__name__)

RELOAD_HEADER = "X-Reload-Secret"


def error_response(status, error, detail):
    return JsonResponse({"error": error, "detail": detail}, status=status)


def _parse_limit(raw):
    if raw is None:
        return getattr(settings, "TOPIC_EXPERTS_DEFAULT_LIMIT", 10)
    raw = raw.strip()
    if not raw.isdigit():
        raise ValueError(raw)
    return int(raw)


@require_GET
def topic_experts_view(request, slug):
    try:
        limit = _parse_limit(request.GET.get("limit"))
    except ValueError:
        return error_response(400, "invalid_limit", "limit must be a non-negative integer")

    try:
        index = get_index()
        experts = index.top_experts(slug, limit)
    except TopicNotFound as exc:
        return error_response(404, "topic_not_found", str(exc))
    except MissingArtifactError as exc:
        logger.error("No index to serve: %s", exc)
        return error_response(503, "index_unavailable", str(exc))

    return JsonResponse(
        {
            "topicSlug": slug,
            "experts": [{"twitterUsername": index.handle_of(e.user), "rank": e.rank} for e in experts],
        }
    )


@require_GET
def user_topics_view(request, username):
    try:
        index = get_index()
        topics = index.user_topics(username)
    except UserNotFound as exc:
        return error_response(404, "user_not_found", str(exc))
    except MissingArtifactError as exc:
        logger.error("No index to serve: %s", exc)
        return error_response(503, "index_unavailable", str(exc))

    return JsonResponse(
        {
            "twitterUsername": index.handle_of(index.resolve_user(username)),
            "topicSetType": "expertise",
            "topicSet": [
                {
                    "topicId": item.topic.id,
                    "topicSlug": item.topic.slug,
                    "topicDisplayName": item.topic.display_name,
                    "topicScore": item.percentile,
                }
                for item in topics
            ],
        }
    )


@csrf_exempt
@require_POST
def reload_view(request):
    secret = getattr(settings, "TOPIC_EXPERTS_RELOAD_SECRET", "") or ""
    provided = request.headers.get(RELOAD_HEADER, "")
    if not secret or not hmac.compare_digest(provided.encode(), secret.encode()):
        return error_response(403, "forbidden", "missing or wrong reload secret")

    try:
        index = reload_index()
    except MissingArtifactError as exc:
        return error_response(503, "index_unavailable", str(exc))

    return JsonResponse({"status": "reloaded", "topics": len(index)})
