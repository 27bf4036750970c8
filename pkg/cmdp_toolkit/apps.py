from django.apps import AppConfig


class CMDPToolkitConfig(AppConfig):
    name = "cmdp_toolkit"
    verbose_name = "CMDP Dual Toolkit"
