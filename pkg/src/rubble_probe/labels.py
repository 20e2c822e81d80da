"""Fixed class vocabulary shared by the DSP, model, telemetry and simulator layers."""

LABELS = ("breathes", "cough", "hello_help", "muffled_words", "noise")
UNCERTAIN = "uncertain"

LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}

# Label spellings as they appear on the probe's serial monitor.
SERIAL_LABELS = {
    "breathes": "breathes",
    "cough": "cough",
    "hello_help": "hello,help",
    "muffled_words": "muffled_words",
    "noise": "noise",
}
SERIAL_TO_LABEL = {v: k for k, v in SERIAL_LABELS.items()}
