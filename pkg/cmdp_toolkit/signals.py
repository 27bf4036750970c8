from django.dispatch import Signal


dual_step_completed = Signal()  # providing_args=["record"]
bisection_step_completed = Signal()  # providing_args=["record"]
