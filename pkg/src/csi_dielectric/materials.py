"""Reference dielectric properties of the bundled demo materials.

Values are VNA open-ended-probe measurements at 5.32 GHz for ethanol/water
mixtures (labelled by alcohol volume fraction), liquors, saline and
glucose/water solutions, plus air. They serve as simulator ground truth and
as the known properties of calibration materials.
"""

from __future__ import annotations

from .trace import DielectricProperties

REFERENCE_FREQ_HZ = 5.32e9

# ethanol/water mixtures, 0 % to 90 % alcohol by volume
ETHANOL_WATER: dict[str, DielectricProperties] = {
    "abv00": DielectricProperties(73.38, 6.41),
    "abv10": DielectricProperties(57.12, 8.33),
    "abv20": DielectricProperties(50.89, 8.64),
    "abv30": DielectricProperties(40.64, 8.57),
    "abv40": DielectricProperties(30.66, 7.71),
    "abv50": DielectricProperties(24.74, 6.82),
    "abv60": DielectricProperties(18.48, 5.54),
    "abv70": DielectricProperties(13.72, 4.32),
    "abv80": DielectricProperties(9.93, 3.15),
    "abv90": DielectricProperties(6.85, 2.02),
}

LIQUORS: dict[str, DielectricProperties] = {
    "baijiu46": DielectricProperties(27.76, 7.29),
    "baijiu56": DielectricProperties(21.33, 6.13),
    "grape_soju": DielectricProperties(51.17, 8.17),
    "jinro_soju": DielectricProperties(50.01, 8.48),
}

SALINE: dict[str, DielectricProperties] = {
    "saline0.9": DielectricProperties(70.87, 7.66),
    "saline3.5": DielectricProperties(64.93, 10.60),
    "saline7.0": DielectricProperties(58.39, 13.84),
}

GLUCOSE_WATER: dict[str, DielectricProperties] = {
    "glucose05": DielectricProperties(70.38, 6.73),
    "glucose10": DielectricProperties(67.63, 6.75),
    "glucose25": DielectricProperties(62.25, 7.10),
}

AIR = DielectricProperties(1.0, 0.0)

REFERENCE_MATERIALS: dict[str, DielectricProperties] = {
    **ETHANOL_WATER,
    **LIQUORS,
    **SALINE,
    **GLUCOSE_WATER,
    "air": AIR,
}

# the ten mixtures are the conventional calibration set; everything else
# (including the mixtures themselves, re-measured) validates the calibration
CALIBRATION_LABELS: tuple[str, ...] = tuple(ETHANOL_WATER)
VALIDATION_LABELS: tuple[str, ...] = tuple(
    label for label in REFERENCE_MATERIALS if label != "air"
)
