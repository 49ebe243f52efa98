from django.apps import AppConfig


class DiffusionsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'diffusions'
    verbose_name = 'Equivariant diffusions'
