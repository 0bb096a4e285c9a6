from django.apps import AppConfig


class FewshotConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'fewshot'
    verbose_name = 'Few-shot protocol'
