"""EEG-to-command pipeline for a brain-controlled wheelchair.

Modules
-------
signal_io   session/epoch model, CSV files, synthetic EEG, replay
preprocess  DC removal, 50/60 Hz notch, amplitude artifact check
spectral    Welch PSD, band powers, max-power channel selection
wavelet     periodized db4 DWT and subband features
classify    SVM / KNN / random forest / MLP, evaluation
runtime     streaming window pipeline with debounced decisions
vehicle     wire protocol, safety gate, differential-drive simulator
"""

__version__ = "0.1.0"
