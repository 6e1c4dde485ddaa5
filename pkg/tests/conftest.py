import hypothesis

# numpy-heavy properties can blow the default deadline on a busy machine;
# the examples budgets below are what make the suite's runtime predictable
hypothesis.settings.register_profile(
    "widthlab", deadline=None, max_examples=50,
    derandomize=True, print_blob=False,
)
hypothesis.settings.load_profile("widthlab")
