from .model import (BUILTINS, MODELS_DIR, Body, FastSlowModel, SignalModel, ThreeBodyModel, Tone, TorusModel,
                    available_models, load_model, model_path)
