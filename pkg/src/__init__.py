# TxOP sharing simulator: analytic channel-access model and MAC simulator
