from hypothesis import settings

# JIT warm-up and a shared CPU make per-example timings meaningless
settings.register_profile("default", deadline=None)
settings.load_profile("default")
