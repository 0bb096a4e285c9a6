"""
URL configuration for the transduct project.

Only the admin is served; it browses the recorded run history.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
