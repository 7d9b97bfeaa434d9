"""Where does a trained attention model look inside a Central-Apnea window?

Trains a BI-AT-GRU on 150 windows per class (a few minutes on one core), then compares the attention mass
near apnea-to-breathing transitions with the mass elsewhere, and draws the
weights for one window under its waveform.
"""
import numpy as np

from respnet.data import FeatureSet
from respnet.evaluate import transition_attention, transition_indices
from respnet.nn.model import ModelDims, attention_weights, init_params
from respnet.rsm import RespiratoryPattern, generate_dataset
from respnet.signal import preprocess
from respnet.train import TrainConfig, train

BARS = " .:-=+*#%@"


def strip(v, width=75):
    means = np.array([c.mean() for c in np.array_split(v, width)])
    scaled = (means - means.min()) / max(np.ptp(means), 1e-12)
    return "".join(BARS[int(s * (len(BARS) - 1))] for s in scaled)


def main():
    data = FeatureSet.from_waveforms(generate_dataset([150] * 6, None, np.random.default_rng(0)))
    model = init_params("bi_at_gru", ModelDims(hidden=32, attention=8), np.random.default_rng(1),
                        carry_bias=2.0, input_shift=0.5, input_scale=20.0)
    model, report, _ = train(model, data, None,
                             TrainConfig(epochs=10, batch_size=32, lr=5e-3, lr_schedule="cosine"))
    print("final training loss", round(report.epoch_loss[-1], 4))

    apnea = generate_dataset({RespiratoryPattern.CENTRAL_APNEA: 40}, None, np.random.default_rng(9))
    diag = transition_attention(model, apnea)
    print(f"mean weight near transitions {diag.inside:.5f}, elsewhere {diag.outside:.5f}, "
          f"ratio {diag.ratio:.2f} over {diag.n_transitions} transitions")

    item = apnea[0]
    x = preprocess(item.waveform)
    alpha = attention_weights(model, x)[0]
    print("\nsignal    " + strip(x))
    print("attention " + strip(alpha))
    marks = [" "] * 75
    for i in transition_indices(item):
        marks[min(74, i * 75 // len(item.waveform))] = "^"
    print("resumes   " + "".join(marks))


if __name__ == "__main__":
    main()
