"""
NucleiGrind — Terminology Glossary.
Plain-English explanations of the nuclei segmentation vocabulary used by the
encoders, the post-processing and the metrics.
Shown by `python main.py glossary`.
"""

# Each category is a (category_name, list_of_(term, explanation)) tuple.
NUCLEI_GLOSSARY = [
    ("The Task", [
        (
            "Instance segmentation",
            "Assigning each pixel both a class and a distinct object identity. "
            "Two touching nuclei must end up with two different labels."
        ),
        (
            "Label map",
            "An integer image where 0 is background and every nucleus has its own "
            "positive id. Ids carry no meaning beyond 'same' or 'different'."
        ),
        (
            "Chromophobe nucleus",
            "A weakly stained nucleus whose interior looks like the surrounding "
            "tissue. Easy to under-segment because only its rim stands out."
        ),
        (
            "Under-segmentation",
            "Merging several true nuclei into one prediction, or losing nucleus "
            "pixels to the background."
        ),
    ]),

    ("Target Encodings", [
        (
            "Structure encoding (SE)",
            "Signed distance to the nearest nucleus contour, normalized per "
            "instance. Positive inside, exactly zero on the contour, negative outside."
        ),
        (
            "HV map",
            "Horizontal and vertical distance of every nucleus pixel to its "
            "instance centroid, scaled to [-1, 1]. The HoverNet-style baseline."
        ),
        (
            "Dir map",
            "The direction from the centroid to each pixel, quantized into K "
            "classes. The CDNet-style baseline."
        ),
        (
            "Position map",
            "Unnormalized distance in pixels from each nucleus pixel to its "
            "centroid. Supervises the position-enhancement head."
        ),
        (
            "Equivariance",
            "encode(T(x)) == T(encode(x)) for a grid transform T. SE and the "
            "position map have it for rotations and flips; HV and Dir do not."
        ),
    ]),

    ("Network Pieces", [
        (
            "SFF (semantic feature fusion)",
            "Concatenates semantic-branch features onto the structure branch, "
            "then applies a convolution."
        ),
        (
            "Criss-cross attention",
            "Attention restricted to the H+W-1 positions sharing a query's row or "
            "column. Two stacked passes reach the whole image."
        ),
        (
            "PE (position enhancement)",
            "Auxiliary regression of the position map that steadies contour "
            "prediction."
        ),
    ]),

    ("Metrics", [
        (
            "Dice",
            "2|P∩G| / (|P|+|G|) on the binary foreground. Blind to how the "
            "foreground is split into instances."
        ),
        (
            "AJI (aggregated Jaccard index)",
            "Matched intersections summed over matched unions plus the area of "
            "every prediction nobody picked. Penalizes over- and under-segmentation."
        ),
        (
            "PQ (panoptic quality)",
            "Sum of matched IoUs over TP + FP/2 + FN/2, where a match needs IoU "
            "> 0.5. Equals detection quality times segmentation quality."
        ),
        (
            "Hausdorff distance",
            "The largest distance from a point of one contour to the nearest "
            "point of the other, taken both ways."
        ),
    ]),
]
