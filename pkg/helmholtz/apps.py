from django.apps import AppConfig


class HelmholtzConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "helmholtz"
    verbose_name = "Bernoulli phase-fitted Helmholtz solver"
