from django.urls import include, path

urlpatterns = [path("", include("topic_experts.urls"))]
