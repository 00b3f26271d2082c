import pandas as pd
import plotly.graph_objects as go

from constants import LOSS_CURVE_PNG


def loss_curve_plot_build_save(
    loss_df: pd.DataFrame,
    chart_title: str = "",
    file_name: str = LOSS_CURVE_PNG,
    smoothing_window: int = 20,
) -> None:
    """
    Per-step loss with its trailing mean and the learning rate on a second axis.
    One line per stage when the curve spans several stages.
    """
    plot_data = []
    for stage, stage_df in loss_df.groupby("stage", sort=False):
        plot_data.append(
            go.Scatter(x=stage_df["step"], y=stage_df["loss"], mode="lines", name=f"{stage} loss", opacity=0.4)
        )
        plot_data.append(
            go.Scatter(
                x=stage_df["step"],
                y=stage_df["loss"].rolling(smoothing_window, min_periods=1).mean(),
                mode="lines",
                name=f"{stage} trailing mean",
            )
        )
        plot_data.append(
            go.Scatter(x=stage_df["step"], y=stage_df["lr"], mode="lines", name=f"{stage} lr", yaxis="y2")
        )
    fig = go.Figure(data=plot_data)
    fig.update_layout(
        title=chart_title,
        title_x=0.5,
        title_y=0.99,
        margin=dict(l=10, r=10, t=30, b=10),
        yaxis=dict(title="loss"),
        yaxis2=dict(title="lr", overlaying="y", side="right"),
    )

    # NOTE it requires kaleido package
    fig.write_image(file_name)
