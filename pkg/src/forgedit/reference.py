"""Published full-scale reference numbers, for documentation only.

These figures come from the full-scale system (pretrained Stable Diffusion
weights, TEdBench, A100 hardware) and are not reproducible at desk scale;
nothing in this package asserts against them.  The executable substitutes
are the property suites and the golden auto-workflow trace shipped with the
fixtures.
"""

TEDBENCH_REFERENCE = {
    "clip_score": 0.771,
    "lpips_score": 0.534,
    "fid_score": 7.071,
}

FULL_SCALE_FINETUNE_SECONDS_A100 = 30.0
