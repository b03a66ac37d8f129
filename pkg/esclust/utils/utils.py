from pathlib import Path
from typing import Optional


class Utils:
    """项目工具类，提供通用的路径和目录管理功能"""

    @staticmethod
    def get_project_root(marker_files: Optional[list] = None) -> Path:
        """
        获取项目根目录

        :param marker_files: 标记文件列表，用于识别项目根目录。默认为常见的项目标记文件
        :return: 项目根目录的Path对象
        """
        marker_files = marker_files or [
            'pyproject.toml',
            '.env',
            'uv.lock'
        ]

        current_path = Path(__file__).resolve()

        # 向上遍历目录树
        for parent in [current_path] + list(current_path.parents):
            for marker in marker_files:
                if (parent / marker).exists():
                    return parent

        # 回退方案：基于 esclust/utils/utils.py 的项目结构
        return current_path.parent.parent.parent

    @staticmethod
    def resolve_path(path: str | Path) -> Path:
        """
        将相对路径解析为相对于项目根目录的绝对路径

        :param path: 文件或目录路径
        :return: 绝对路径
        """
        path = Path(path)
        if path.is_absolute():
            return path
        return Utils.get_project_root() / path

    @staticmethod
    def get_results_dir(name: str = "results") -> Path:
        """
        获取基准测试结果目录

        :param name: 结果目录名（相对项目根目录）
        :return: 结果目录的Path对象
        """
        results_dir = Utils.resolve_path(name)
        results_dir.mkdir(parents=True, exist_ok=True)
        return results_dir

    @staticmethod
    def get_log_dir(name: str = "logs") -> Path:
        """获取日志目录"""
        log_dir = Utils.resolve_path(name)
        log_dir.mkdir(parents=True, exist_ok=True)
        return log_dir
