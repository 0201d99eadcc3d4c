"""
Django settings for the topic_experts example project.

Pipeline and API knobs are read from the environment so the same project
can run stages locally and serve an index built elsewhere.
"""
import os
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get("DJANGO_SECRET_KEY", "django-insecure-topic-experts-dev")

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.environ.get("DJANGO_DEBUG", "1") == "1"

ALLOWED_HOSTS = ["0.0.0.0", "127.0.0.1", "localhost"]

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "topic_experts",
]

MIDDLEWARE = [
    "django.middleware.security.SecurityMiddleware",
    "django.middleware.common.CommonMiddleware",
]

ROOT_URLCONF = "example_project.urls"

WSGI_APPLICATION = "example_project.wsgi.application"

DATABASES = {}

TIME_ZONE = "UTC"
USE_TZ = True

TOPIC_EXPERTS_INDEX_DIR = os.environ.get("TOPIC_EXPERTS_INDEX_DIR", str(BASE_DIR / "work" / "index"))
TOPIC_EXPERTS_RELOAD_SECRET = os.environ.get("TOPIC_EXPERTS_RELOAD_SECRET", "")
TOPIC_EXPERTS_PARALLEL = os.environ.get("TOPIC_EXPERTS_PARALLEL", "1") == "1"
TOPIC_EXPERTS_PARTITIONS = int(os.environ.get("TOPIC_EXPERTS_PARTITIONS", "8"))
TOPIC_EXPERTS_DEFAULT_LIMIT = 10
TOPIC_EXPERTS_NNLS_TOL = 1e-10
TOPIC_EXPERTS_SPLIT_SEED = int(os.environ.get("TOPIC_EXPERTS_SPLIT_SEED", "0"))
TOPIC_EXPERTS_TRAIN_FRACTION = 0.8
TOPIC_EXPERTS_STACK_FOLDS = 5

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "simple"},
    },
    "loggers": {
        "topic_experts": {
            "handlers": ["console"],
            "level": os.environ.get("TOPIC_EXPERTS_LOG_LEVEL", "INFO"),
        },
    },
}
