import math
import os
from datetime import date

BASE_PATH = os.path.abspath(os.getcwd())
CONFIG_FOLDER_PATH = os.path.join(BASE_PATH, "configuration")
CONFIGURATION_FILE_PATH = os.path.join(CONFIG_FOLDER_PATH, "smoke_grid.cfg")
RESULTS_FOLDER = os.path.join(BASE_PATH, "results")
INPUT_FOLDER = os.path.join(BASE_PATH, "input")

ENDPOINT_ENV_VAR = "QSTOCK_ENDPOINT"

# market data
OHLC_HEADER = ["Date", "Open", "High", "Low", "Close", "Volume"]
OHLC_REQUIRED_COLUMNS = ("Date", "Open", "High", "Low", "Close", "Volume")
OHLC_OPTIONAL_COLUMNS = ("Adj Close",)
DATE_FORMAT = "%Y-%m-%d"
DEFAULT_SYMBOLS = ("HON", "JNJ", "AAPL", "V")
DEFAULT_START = date(2020, 12, 25)
DEFAULT_END = date(2022, 12, 25)
SYNTH_START = date(2020, 12, 28)
DEFAULT_TEST_FRACTION = 0.2
FETCH_TIMEOUT_SECONDS = 30.0

# indicator windows of the canonical feature set
SMA_WINDOWS = (10, 20)
EMA_WINDOWS = (10, 20)
RSI_WINDOW = 14
MACD_FAST, MACD_SLOW, MACD_SIGNAL = 12, 26, 9
STOCH_K_WINDOW, STOCH_D_WINDOW = 14, 3
ATR_WINDOW = 14
AROON_WINDOW = 25
MIN_DATASET_ROWS = 30

CANONICAL_FEATURES = (
    "sma_10",
    "sma_20",
    "ema_10",
    "ema_20",
    "rsi_14",
    "macd_line",
    "macd_signal",
    "macd_hist",
    "stoch_k",
    "stoch_d",
    "atr_14",
    "aroon_up",
    "aroon_down",
)

ANGLE_MAX = math.pi

# dimensionality reduction
JACOBI_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 100

# qubo feature selection
QUBO_ALPHA = 0.5
EXHAUSTIVE_MAX_VARIABLES = 24
ANNEAL_SWEEPS = 1000
ANNEAL_RESTARTS = 20
ANNEAL_T_COLD = 1e-3
ANNEAL_T_HOT_FACTOR = 10.0
PENALTY_ESCALATIONS = 3

# quantum kernel
MAX_QUBITS = 16
DEFAULT_REPS = 2

# classifiers
SVM_C = 1.0
SVM_TOL = 1e-3
SVM_MAX_PASSES = 10_000
LOGREG_LEARNING_RATE = 0.1
LOGREG_EPOCHS = 500
LOGREG_L2 = 1e-4
KNN_NEIGHBOURS = 5
TREE_MAX_DEPTH = 5
FOREST_TREES = 100
BOOSTING_ROUNDS = 100
BOOSTING_DEPTH = 3
BOOSTING_LEARNING_RATE = 0.1
NB_VAR_SMOOTHING = 1e-9

# harness
DEFAULT_SEED = 42
REPORT_CSV_HEADER = ["dataset", "model", "entanglement", "reduction", "accuracy", "f_score"]
MARKDOWN_HEADER = ["Model", "Entanglement Scheme", "Dimensionality Reduction", "Accuracy", "F-Score"]
AVERAGE_HEADER = ["Model", "Dimensionality Reduction", "AVG Accuracy", "AVG F-Score"]
CLASSICAL_FAMILY = "Classical Machine Learning"
QSVM_FAMILY = "QSVM"
