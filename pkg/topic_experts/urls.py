from django.urls import path

from . import views

app_name = "topic_experts"


urlpatterns = [
    path("topics/<str:slug>/experts", views.topic_experts_view, name="topic-experts"),
    path("users/<str:username>/topics", views.user_topics_view, name="user-topics"),
    path("admin/reload", views.reload_view, name="reload"),
]
